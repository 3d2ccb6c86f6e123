//! Change maps against per-voxel enumeration plus flood-fill filtering.

mod common;

use common::{pair, DIMS};
use lesion_change::change::{change_maps, raw_change_maps, ChangeParams, RuleRegistry};
use lesion_change::Connectivity;
use lesion_change_oracles as oracle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn oracle_labels(t: &lesion_change::Timepoint, rule: &str, params: &ChangeParams) -> Vec<Option<bool>> {
    let mask = t.mask.bits();
    let flip = t.flip.as_ref().unwrap().data();
    let score = t.score.as_ref().unwrap().data();
    (0..mask.len())
        .map(|i| match rule {
            "confidence" => oracle::flip_confidence(mask[i], flip[i], params.q),
            "margin" => oracle::margin_confidence(score[i], params.margin),
            "naive" => Some(mask[i]),
            _ => unreachable!(),
        })
        .collect()
}

#[test]
fn change_maps_match_enumeration_oracle() {
    let registry = RuleRegistry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for _ in 0..200 {
        let (a, b) = pair(&mut rng);
        for rule in ["confidence", "margin", "naive"] {
            for min_voxels in [0, 12] {
                for conn in Connectivity::ALL {
                    let params = ChangeParams {
                        rule: rule.into(),
                        min_voxels,
                        connectivity: conn,
                        ..ChangeParams::default()
                    };
                    let r = registry.build(&params).unwrap();
                    let got = change_maps(&a, &b, r.as_ref(), min_voxels, conn).unwrap();
                    let (new, missing) = oracle::enumerate_change(
                        &oracle_labels(&a, rule, &params),
                        &oracle_labels(&b, rule, &params),
                    );
                    let c = conn.neighbours();
                    let new = oracle::size_filter(DIMS, &new, min_voxels, c);
                    let missing = oracle::size_filter(DIMS, &missing, min_voxels, c);
                    assert_eq!(got.new_lesion.bits(), &new[..], "rule {rule} min {min_voxels} conn {c}");
                    assert_eq!(got.missing_lesion.bits(), &missing[..]);
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 200 * 3 * 2 * 3);
}

#[test]
fn swapping_timepoints_swaps_new_and_missing() {
    let registry = RuleRegistry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (a, b) = pair(&mut rng);
        for rule in ["confidence", "margin", "naive"] {
            let params = ChangeParams { rule: rule.into(), ..ChangeParams::default() };
            let r = registry.build(&params).unwrap();
            let ab = change_maps(&a, &b, r.as_ref(), 12, Connectivity::TwentySix).unwrap();
            let ba = change_maps(&b, &a, r.as_ref(), 12, Connectivity::TwentySix).unwrap();
            assert_eq!(ab.new_lesion, ba.missing_lesion);
            assert_eq!(ab.missing_lesion, ba.new_lesion);
            assert!(ab
                .new_lesion
                .bits()
                .iter()
                .zip(ab.missing_lesion.bits())
                .all(|(n, m)| !(n & m)));
        }
    }
}

#[test]
fn identical_timepoints_give_empty_maps() {
    let registry = RuleRegistry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let (a, _) = pair(&mut rng);
        for rule in ["confidence", "margin", "naive"] {
            let params = ChangeParams { rule: rule.into(), ..ChangeParams::default() };
            let r = registry.build(&params).unwrap();
            let maps = raw_change_maps(&a, &a, r.as_ref()).unwrap();
            assert!(maps.new_lesion.is_empty() && maps.missing_lesion.is_empty());
        }
    }
}

#[test]
fn naive_equals_confidence_at_half() {
    let registry = RuleRegistry::builtin();
    let naive = registry.build(&ChangeParams { rule: "naive".into(), ..Default::default() }).unwrap();
    let half = registry
        .build(&ChangeParams { rule: "confidence".into(), q: 0.5, ..Default::default() })
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let (a, b) = pair(&mut rng);
        for min_voxels in [0, 12] {
            let x = change_maps(&a, &b, naive.as_ref(), min_voxels, Connectivity::TwentySix).unwrap();
            let y = change_maps(&a, &b, half.as_ref(), min_voxels, Connectivity::TwentySix).unwrap();
            assert_eq!(x, y);
        }
    }
}

fn subset(small: &[bool], large: &[bool]) -> bool {
    small.iter().zip(large).all(|(&s, &l)| !s || l)
}

#[test]
fn raw_new_lesions_nest_with_q_and_margin() {
    let registry = RuleRegistry::builtin();
    let qs = [0.0005, 0.001, 0.01, 0.05, 0.1, 0.2, 0.5];
    let ms = [0.49, 0.45, 0.4, 0.3, 0.1, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let (a, b) = pair(&mut rng);
        let by_q: Vec<_> = qs
            .iter()
            .map(|&q| {
                let r = registry
                    .build(&ChangeParams { rule: "confidence".into(), q, ..Default::default() })
                    .unwrap();
                raw_change_maps(&a, &b, r.as_ref()).unwrap()
            })
            .collect();
        for w in by_q.windows(2) {
            assert!(subset(w[0].new_lesion.bits(), w[1].new_lesion.bits()));
            assert!(subset(w[0].missing_lesion.bits(), w[1].missing_lesion.bits()));
        }
        let by_m: Vec<_> = ms
            .iter()
            .map(|&margin| {
                let r = registry
                    .build(&ChangeParams { rule: "margin".into(), margin, ..Default::default() })
                    .unwrap();
                raw_change_maps(&a, &b, r.as_ref()).unwrap()
            })
            .collect();
        for w in by_m.windows(2) {
            assert!(subset(w[0].new_lesion.bits(), w[1].new_lesion.bits()));
        }
    }
}

#[test]
fn filtered_volume_shrinks_with_min_voxels() {
    let registry = RuleRegistry::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (a, b) = pair(&mut rng);
        for rule in ["confidence", "margin", "naive"] {
            let r = registry.build(&ChangeParams { rule: rule.into(), ..Default::default() }).unwrap();
            let mut last = usize::MAX;
            for min_voxels in [0, 1, 2, 6, 12, 24, 100] {
                let maps = change_maps(&a, &b, r.as_ref(), min_voxels, Connectivity::TwentySix).unwrap();
                let n = maps.new_lesion.count();
                assert!(n <= last);
                last = n;
            }
        }
    }
}
