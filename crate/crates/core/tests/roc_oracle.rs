//! ROC area against the pairwise-ordering definition.

use lesion_change::eval::{confusion_at_zero, roc_auc};
use lesion_change::Error;
use lesion_change_oracles::{confusion_counts, pairwise_auc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn worked_example_is_three_quarters() {
    let r = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
    assert_eq!(r.auc, 0.75);
}

fn random_case(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.gen_range(2..=200);
    // A small value pool forces ties; the sentinels exercise infinite scores.
    let pool: Vec<f64> = (0..rng.gen_range(1..12)).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    let scores = (0..n)
        .map(|_| match rng.gen_range(0..20) {
            0 => f64::INFINITY,
            1 => f64::NEG_INFINITY,
            2 => 0.0,
            3..=10 => pool[rng.gen_range(0..pool.len())],
            _ => rng.gen_range(-5.0..5.0),
        })
        .collect();
    (scores, labels)
}

#[test]
fn trapezoid_area_equals_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let (scores, labels) = random_case(&mut rng);
        let r = roc_auc(&scores, &labels).unwrap();
        let want = pairwise_auc(&scores, &labels);
        assert!((r.auc - want).abs() <= 1e-9, "{} vs {}", r.auc, want);
        let first = r.points.first().unwrap();
        let last = r.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!(r.points.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
    }
}

#[test]
fn operating_point_matches_counted_confusion() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100 {
        let (scores, labels) = random_case(&mut rng);
        let c = confusion_at_zero(&scores, &labels).unwrap();
        assert_eq!((c.tn, c.fp, c.fn_, c.tp), confusion_counts(&scores, &labels));
    }
}

#[test]
fn zero_metric_is_predicted_stable() {
    let c = confusion_at_zero(&[0.0, 0.0], &[true, false]).unwrap();
    assert_eq!((c.tn, c.fp, c.fn_, c.tp), (1, 0, 1, 0));
}

#[test]
fn single_class_is_undefined() {
    assert!(matches!(roc_auc(&[1.0, 2.0], &[true, true]), Err(Error::UndefinedAuc(_))));
}
