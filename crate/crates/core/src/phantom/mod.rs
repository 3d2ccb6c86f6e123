//! Seeded synthetic longitudinal cohorts with known progression labels.
//!
//! Each patient gets ellipsoidal lesions inside a central ellipsoidal brain.
//! A timepoint's score field is the logistic of the scaled signed distance to
//! its lesion set plus a global per-timepoint offset, so stable follow-ups
//! differ only by a small boundary shift while progressive ones gain a lesion.

mod ellipsoid;

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ellipsoid::Ellipsoid;

use crate::error::{Error, Result};
use crate::eval::{CohortManifest, PatientEntry, TimepointEntry};
use crate::grid_ops::RigidTransform;
use crate::morphology::{label_bits, Connectivity};
use crate::nifti::{write_mask, write_volume, Datatype};
use crate::volume::{FlipMap, Grid, LesionMask, ScoreMap, TargetGrid, Volume};

/// Placement attempts per lesion before generation gives up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;
/// Largest grid side accepted.
pub const MAX_GRID_SIDE: usize = 128;
/// Flip threshold for the guaranteed confident core of an injected lesion.
pub const CORE_FLIP: f32 = 0.01;
/// Voxels the confident core must reach.
pub const CORE_VOXELS: usize = 12;
/// Logit magnitude beyond which the field is saturated.
const LOGIT_CAP: f64 = 12.0;
/// Minimum surface clearance between lesions, in mm.
const LESION_GAP_MM: f64 = 4.0;
/// Fraction of each grid extent covered by the brain semi-axes.
const BRAIN_FRACTION: f64 = 0.42;

pub const TRUTH_FILE: &str = "phantom_truth.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    pub seed: u64,
    pub n_patients: usize,
    pub timepoints_per_patient: usize,
    pub grid_dims: [usize; 3],
    pub grid_spacing_mm: f64,
    pub baseline_lesion_count_range: [usize; 2],
    pub lesion_radius_range_mm: [f64; 2],
    pub progression_probability: f64,
    pub new_lesion_radius_range_mm: [f64; 2],
    /// Standard deviation of the per-timepoint logit offset.
    pub contrast_jitter_sd: f64,
    /// Logit units per mm of signed distance at lesion edges.
    pub boundary_sharpness: f64,
    /// Chance that a baseline lesion is faint.
    pub faint_lesion_probability: f64,
    /// Sharpness multiplier applied to faint lesions.
    pub faint_sharpness_factor: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            seed: 42,
            n_patients: 20,
            timepoints_per_patient: 4,
            grid_dims: [64, 64, 64],
            grid_spacing_mm: 1.0,
            baseline_lesion_count_range: [4, 10],
            lesion_radius_range_mm: [2.0, 6.0],
            progression_probability: 0.3,
            new_lesion_radius_range_mm: [2.5, 4.0],
            contrast_jitter_sd: 0.5,
            boundary_sharpness: 6.0,
            faint_lesion_probability: 0.4,
            faint_sharpness_factor: 0.35,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::validation(msg));
        if self.n_patients == 0 {
            return fail("n_patients must be at least 1".into());
        }
        if self.timepoints_per_patient < 2 {
            return fail("timepoints_per_patient must be at least 2".into());
        }
        if self.grid_dims.iter().any(|&d| !(16..=MAX_GRID_SIDE).contains(&d)) {
            return fail(format!(
                "grid_dims {:?} must lie in [16, {MAX_GRID_SIDE}] per axis",
                self.grid_dims
            ));
        }
        if !(self.grid_spacing_mm.is_finite() && self.grid_spacing_mm > 0.0) {
            return fail(format!("grid_spacing_mm {} must be positive", self.grid_spacing_mm));
        }
        let [lo, hi] = self.baseline_lesion_count_range;
        if lo > hi {
            return fail(format!("baseline_lesion_count_range [{lo}, {hi}] is not ordered"));
        }
        for (name, [lo, hi]) in [
            ("lesion_radius_range_mm", self.lesion_radius_range_mm),
            ("new_lesion_radius_range_mm", self.new_lesion_radius_range_mm),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return fail(format!("{name} [{lo}, {hi}] must be positive and ordered"));
            }
        }
        for (name, p) in [
            ("progression_probability", self.progression_probability),
            ("faint_lesion_probability", self.faint_lesion_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} {p} must lie in [0, 1]"));
            }
        }
        if !(self.contrast_jitter_sd.is_finite() && self.contrast_jitter_sd >= 0.0) {
            return fail(format!("contrast_jitter_sd {} must be >= 0", self.contrast_jitter_sd));
        }
        if !(self.boundary_sharpness.is_finite() && self.boundary_sharpness > 0.0) {
            return fail(format!("boundary_sharpness {} must be positive", self.boundary_sharpness));
        }
        if !(self.faint_sharpness_factor > 0.0 && self.faint_sharpness_factor <= 1.0) {
            return fail(format!(
                "faint_sharpness_factor {} must lie in (0, 1]",
                self.faint_sharpness_factor
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TargetGrid> {
        let s = self.grid_spacing_mm;
        Grid::axis_aligned(self.grid_dims, [s; 3], [0.0; 3])
    }

    fn brain(&self) -> Ellipsoid {
        let extent = self.grid_dims.map(|d| (d - 1) as f64 * self.grid_spacing_mm);
        Ellipsoid {
            center: extent.map(|e| e / 2.0),
            radii: extent.map(|e| e * BRAIN_FRACTION),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomLesion {
    pub shape: Ellipsoid,
    pub sharpness: f64,
    pub faint: bool,
    /// Index of the first timepoint showing the lesion.
    pub onset: usize,
}

#[derive(Debug, Clone)]
pub struct PhantomTimepoint {
    pub id: String,
    pub jitter: f64,
    pub progressive: Option<bool>,
    pub score: ScoreMap,
    pub flip: FlipMap,
    pub mask: LesionMask,
}

#[derive(Debug, Clone)]
pub struct PhantomPatient {
    pub id: String,
    pub lesions: Vec<PhantomLesion>,
    pub timepoints: Vec<PhantomTimepoint>,
}

impl PhantomPatient {
    pub fn lesions_at(&self, t: usize) -> impl Iterator<Item = &PhantomLesion> {
        self.lesions.iter().filter(move |l| l.onset <= t)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthPatient {
    id: String,
    jitters: Vec<f64>,
    progressive: Vec<Option<bool>>,
    lesions: Vec<PhantomLesion>,
}

pub fn patient_id(index: usize) -> String {
    format!("P{:03}", index + 1)
}

pub fn timepoint_id(index: usize) -> String {
    format!("T{index}")
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream per patient so generation order cannot matter.
fn patient_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(index as u64 + 1)))
}

fn uniform_range(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Draws one candidate lesion inside the brain and clear of `existing`.
fn propose_lesion(
    rng: &mut ChaCha8Rng,
    brain: &Ellipsoid,
    radius_range: [f64; 2],
    existing: &[PhantomLesion],
) -> Option<Ellipsoid> {
    let radii = [0; 3].map(|_| uniform_range(rng, radius_range));
    let candidate = Ellipsoid {
        center: [0, 1, 2].map(|a| {
            rng.gen_range(brain.center[a] - brain.radii[a]..=brain.center[a] + brain.radii[a])
        }),
        radii,
    };
    let r = candidate.max_radius();
    let inner = Ellipsoid {
        center: brain.center,
        radii: brain.radii.map(|b| b - r - 1.0),
    };
    if inner.radii.iter().any(|&b| b <= 0.0) || !inner.contains(candidate.center) {
        return None;
    }
    let clear = existing.iter().all(|other| {
        let d = (0..3)
            .map(|a| (candidate.center[a] - other.shape.center[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        d > r + other.shape.max_radius() + LESION_GAP_MM
    });
    clear.then_some(candidate)
}

/// Saturated logit field `max_i sharpness_i * depth_i` over `lesions`.
fn logit_field<'a>(grid: &Grid, lesions: impl Iterator<Item = &'a PhantomLesion>) -> Vec<f64> {
    let dims = grid.dims();
    let spacing = grid.spacing();
    let mut field = vec![-LOGIT_CAP; grid.len()];
    for lesion in lesions {
        let reach = lesion.shape.max_radius() + LOGIT_CAP / lesion.sharpness;
        let bounds: [(usize, usize); 3] = [0, 1, 2].map(|a| {
            let lo = ((lesion.shape.center[a] - reach) / spacing[a]).floor().max(0.0) as usize;
            let hi = ((lesion.shape.center[a] + reach) / spacing[a])
                .ceil()
                .min((dims[a] - 1) as f64);
            (lo, hi.max(0.0) as usize)
        });
        for z in bounds[2].0..=bounds[2].1 {
            for y in bounds[1].0..=bounds[1].1 {
                for x in bounds[0].0..=bounds[0].1 {
                    let p = [
                        x as f64 * spacing[0],
                        y as f64 * spacing[1],
                        z as f64 * spacing[2],
                    ];
                    let logit = (lesion.sharpness * lesion.shape.signed_depth(p))
                        .clamp(-LOGIT_CAP, LOGIT_CAP);
                    let slot = &mut field[grid.index(x, y, z)];
                    if logit > *slot {
                        *slot = logit;
                    }
                }
            }
        }
    }
    field
}

/// Score sample for a logit; never exactly 0.5 so flip stays below 0.5.
fn score_sample(logit: f64) -> f32 {
    let p = (1.0 / (1.0 + (-logit).exp())) as f32;
    if p == 0.5 {
        f32::from_bits(0.5f32.to_bits() - 1)
    } else {
        p
    }
}

/// Builds score, flip and mask for one timepoint.
fn render(grid: &Grid, field: &[f64], jitter: f64) -> Result<(ScoreMap, FlipMap, LesionMask)> {
    let score: Vec<f32> = field.iter().map(|&z| score_sample(z + jitter)).collect();
    let flip: Vec<f32> = score.iter().map(|&p| p.min(1.0 - p)).collect();
    let bits: Vec<bool> = score.iter().map(|&p| p > 0.5).collect();
    Ok((
        ScoreMap::new(Volume::new(grid.clone(), score)?)?,
        FlipMap::new(Volume::new(grid.clone(), flip)?)?,
        LesionMask::new(grid.clone(), bits)?,
    ))
}

/// Size of the largest 6-connected set of voxels inside `lesion` that are
/// confident lesion at `after` and confident non-lesion at `before`.
fn confident_core(
    grid: &Grid,
    lesion: &Ellipsoid,
    before: (&FlipMap, &LesionMask),
    after: (&FlipMap, &LesionMask),
) -> usize {
    let spacing = grid.spacing();
    let bits: Vec<bool> = (0..grid.len())
        .map(|i| {
            let [x, y, z] = grid.coords(i);
            let p = [x as f64 * spacing[0], y as f64 * spacing[1], z as f64 * spacing[2]];
            after.1.bits()[i]
                && after.0.data()[i] < CORE_FLIP
                && !before.1.bits()[i]
                && before.0.data()[i] < CORE_FLIP
                && lesion.contains(p)
        })
        .collect();
    let labeling = label_bits(grid.dims(), &bits, Connectivity::Six);
    labeling.sizes.iter().copied().max().unwrap_or(0)
}

/// Generates one patient in memory.
pub fn generate_patient(config: &PhantomConfig, index: usize) -> Result<PhantomPatient> {
    config.validate()?;
    let grid = config.grid()?;
    let brain = config.brain();
    let id = patient_id(index);
    let mut rng = patient_rng(config.seed, index);

    let [lo, hi] = config.baseline_lesion_count_range;
    let n_baseline = rng.gen_range(lo..=hi);
    let mut lesions: Vec<PhantomLesion> = Vec::with_capacity(n_baseline + 2);
    for k in 0..n_baseline {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            if let Some(shape) = propose_lesion(&mut rng, &brain, config.lesion_radius_range_mm, &lesions) {
                placed = Some(shape);
                break;
            }
        }
        let shape = placed.ok_or_else(|| {
            Error::Generation(format!(
                "patient {id}: could not place baseline lesion {} disjointly after {MAX_PLACEMENT_ATTEMPTS} attempts",
                k + 1
            ))
        })?;
        let faint = rng.gen_bool(config.faint_lesion_probability);
        let sharpness = if faint {
            config.boundary_sharpness * config.faint_sharpness_factor
        } else {
            config.boundary_sharpness
        };
        lesions.push(PhantomLesion { shape, sharpness, faint, onset: 0 });
    }

    let jitter_dist = Normal::new(0.0, config.contrast_jitter_sd)
        .map_err(|e| Error::validation(format!("contrast_jitter_sd: {e}")))?;
    let jitters: Vec<f64> = (0..config.timepoints_per_patient)
        .map(|_| jitter_dist.sample(&mut rng))
        .collect();

    let field = logit_field(&grid, lesions.iter());
    let (score, flip, mask) = render(&grid, &field, jitters[0])?;
    let mut timepoints = vec![PhantomTimepoint {
        id: timepoint_id(0),
        jitter: jitters[0],
        progressive: None,
        score,
        flip,
        mask,
    }];

    for (t, &jitter) in jitters.iter().enumerate().skip(1) {
        let progressive = rng.gen_bool(config.progression_probability);
        let mut rendered = None;
        if progressive {
            let prev = timepoints.last().expect("baseline rendered");
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let Some(shape) =
                    propose_lesion(&mut rng, &brain, config.new_lesion_radius_range_mm, &lesions)
                else {
                    continue;
                };
                lesions.push(PhantomLesion {
                    shape,
                    sharpness: config.boundary_sharpness,
                    faint: false,
                    onset: t,
                });
                let field = logit_field(&grid, lesions.iter());
                let maps = render(&grid, &field, jitter)?;
                let core =
                    confident_core(&grid, &shape, (&prev.flip, &prev.mask), (&maps.1, &maps.2));
                if core >= CORE_VOXELS {
                    rendered = Some(maps);
                    break;
                }
                lesions.pop();
            }
            if rendered.is_none() {
                return Err(Error::Generation(format!(
                    "patient {id}: could not inject a confident new lesion at timepoint {t} after {MAX_PLACEMENT_ATTEMPTS} attempts"
                )));
            }
        }
        let (score, flip, mask) = match rendered {
            Some(maps) => maps,
            None => render(&grid, &logit_field(&grid, lesions.iter()), jitter)?,
        };
        timepoints.push(PhantomTimepoint {
            id: timepoint_id(t),
            jitter,
            progressive: Some(progressive),
            score,
            flip,
            mask,
        });
    }

    Ok(PhantomPatient { id, lesions, timepoints })
}

fn write_patient(patient: &PhantomPatient, out_dir: &Path) -> Result<PatientEntry> {
    let dir = out_dir.join(&patient.id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let identity = RigidTransform::identity();
    let mut entries = Vec::with_capacity(patient.timepoints.len());
    for tp in &patient.timepoints {
        let rel = |suffix: &str| PathBuf::from(&patient.id).join(format!("{}_{suffix}", tp.id));
        let entry = TimepointEntry {
            id: tp.id.clone(),
            mask_path: rel("mask.nii.gz"),
            flip_path: rel("flip.nii.gz"),
            score_path: Some(rel("score.nii.gz")),
            transform_path: Some(rel("transform.txt")),
            progressive: tp.progressive,
        };
        write_mask(&tp.mask, out_dir.join(&entry.mask_path))?;
        write_volume(tp.flip.volume(), out_dir.join(&entry.flip_path), Datatype::Float32)?;
        write_volume(tp.score.volume(), out_dir.join(rel("score.nii.gz")), Datatype::Float32)?;
        identity.write(out_dir.join(rel("transform.txt")))?;
        entries.push(entry);
    }
    Ok(PatientEntry {
        id: patient.id.clone(),
        timepoints: entries,
    })
}

/// Generates the cohort, writes volumes, transforms, `manifest.json` and a
/// ground-truth file into `out_dir`, and returns the manifest.
pub fn generate_cohort(config: &PhantomConfig, out_dir: impl AsRef<Path>) -> Result<CohortManifest> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let results: Vec<Result<(PatientEntry, TruthPatient)>> = (0..config.n_patients)
        .into_par_iter()
        .map(|index| {
            let patient = generate_patient(config, index)?;
            let entry = write_patient(&patient, out_dir)?;
            let truth = TruthPatient {
                id: patient.id.clone(),
                jitters: patient.timepoints.iter().map(|t| t.jitter).collect(),
                progressive: patient.timepoints.iter().map(|t| t.progressive).collect(),
                lesions: patient.lesions,
            };
            Ok((entry, truth))
        })
        .collect();
    let (entries, truth): (Vec<_>, Vec<_>) = results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();

    let mut manifest = CohortManifest::new(entries);
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    let truth_path = out_dir.join(TRUTH_FILE);
    let text = serde_json::to_string_pretty(&truth).expect("truth serializes") + "\n";
    fs::write(&truth_path, text).map_err(|e| Error::io(&truth_path, e))?;
    manifest.base_dir = out_dir.to_path_buf();
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(progression: f64) -> PhantomConfig {
        PhantomConfig {
            n_patients: 1,
            timepoints_per_patient: 2,
            progression_probability: progression,
            ..PhantomConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        PhantomConfig::default().validate().unwrap();
        assert_eq!(PhantomConfig::default().grid().unwrap().dims(), [64, 64, 64]);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            PhantomConfig { n_patients: 0, ..Default::default() },
            PhantomConfig { timepoints_per_patient: 1, ..Default::default() },
            PhantomConfig { grid_dims: [129, 64, 64], ..Default::default() },
            PhantomConfig { baseline_lesion_count_range: [5, 2], ..Default::default() },
            PhantomConfig { lesion_radius_range_mm: [6.0, 2.0], ..Default::default() },
            PhantomConfig { progression_probability: 1.5, ..Default::default() },
            PhantomConfig { contrast_jitter_sd: -1.0, ..Default::default() },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(Error::Validation(_))), "{c:?}");
        }
    }

    #[test]
    fn crowded_brain_is_a_generation_error() {
        let config = PhantomConfig {
            grid_dims: [16, 16, 16],
            baseline_lesion_count_range: [20, 20],
            lesion_radius_range_mm: [3.0, 3.0],
            ..small(0.0)
        };
        assert!(matches!(generate_patient(&config, 0), Err(Error::Generation(_))));
    }

    #[test]
    fn maps_respect_their_ranges_and_mask_is_score_threshold() {
        let patient = generate_patient(&small(1.0), 0).unwrap();
        for tp in &patient.timepoints {
            assert!(tp.flip.data().iter().all(|&f| (0.0..0.5).contains(&f)));
            assert!(tp.score.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
            let expect: Vec<bool> = tp.score.data().iter().map(|&p| p > 0.5).collect();
            assert_eq!(tp.mask.bits(), &expect[..]);
        }
    }

    #[test]
    fn progressive_timepoint_has_confident_core() {
        let config = small(1.0);
        let patient = generate_patient(&config, 0).unwrap();
        assert_eq!(patient.timepoints[1].progressive, Some(true));
        let new: Vec<_> = patient.lesions.iter().filter(|l| l.onset == 1).collect();
        assert!(!new.is_empty());
        let (a, b) = (&patient.timepoints[0], &patient.timepoints[1]);
        let grid = config.grid().unwrap();
        let core = (0..grid.len())
            .filter(|&i| {
                let [x, y, z] = grid.coords(i);
                let p = [x as f64, y as f64, z as f64];
                new.iter().any(|l| l.shape.contains(p))
                    && b.mask.bits()[i]
                    && b.flip.data()[i] < CORE_FLIP
                    && !a.mask.bits()[i]
                    && a.flip.data()[i] < CORE_FLIP
            })
            .count();
        assert!(core >= CORE_VOXELS, "core {core}");
    }

    #[test]
    fn stable_differences_hug_lesion_boundaries() {
        for index in 0..4 {
            let config = PhantomConfig { timepoints_per_patient: 3, ..small(0.0) };
            let patient = generate_patient(&config, index).unwrap();
            assert!(patient.lesions.iter().all(|l| l.onset == 0));
            let grid = config.grid().unwrap();
            for pair in patient.timepoints.windows(2) {
                for i in 0..grid.len() {
                    if pair[0].mask.bits()[i] == pair[1].mask.bits()[i] {
                        continue;
                    }
                    let [x, y, z] = grid.coords(i);
                    let p = [x as f64, y as f64, z as f64];
                    let nearest = patient
                        .lesions
                        .iter()
                        .map(|l| l.shape.signed_depth(p).abs())
                        .fold(f64::INFINITY, f64::min);
                    assert!(nearest <= 2.0, "voxel {i} lies {nearest} mm from any boundary");
                }
            }
        }
    }

    #[test]
    fn patients_are_reproducible_and_independent_of_order() {
        let config = PhantomConfig { n_patients: 3, ..small(0.5) };
        let late = generate_patient(&config, 2).unwrap();
        let _ = generate_patient(&config, 0).unwrap();
        let again = generate_patient(&config, 2).unwrap();
        assert_eq!(late.lesions, again.lesions);
        for (a, b) in late.timepoints.iter().zip(&again.timepoints) {
            assert_eq!(a.score, b.score);
        }
    }
}
