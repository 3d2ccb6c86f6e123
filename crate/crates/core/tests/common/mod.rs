#![allow(dead_code)]

use lesion_change::{FlipMap, Grid, LesionMask, ScoreMap, Timepoint, Volume};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const DIMS: [usize; 3] = [8, 8, 8];

/// Flip values biased toward the interesting thresholds.
fn flip_sample(rng: &mut ChaCha8Rng) -> f32 {
    match rng.gen_range(0..10) {
        0 => 0.05,
        1 => 0.0,
        2 => f32::from_bits(0.5f32.to_bits() - 1),
        3 => 0.01,
        _ => rng.gen_range(0.0..0.5),
    }
}

fn score_sample(rng: &mut ChaCha8Rng) -> f32 {
    match rng.gen_range(0..10) {
        0 => 0.95,
        1 => 0.05,
        2 => 0.5,
        3 => 1.0,
        4 => 0.0,
        _ => rng.gen_range(0.0..=1.0),
    }
}

/// Random mask with lesion density `density`, plus random flip and score maps.
pub fn random_timepoint(rng: &mut ChaCha8Rng, grid: &Grid, density: f64) -> Timepoint {
    let n = grid.len();
    let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(density)).collect();
    let flip: Vec<f32> = (0..n).map(|_| flip_sample(rng)).collect();
    let score: Vec<f32> = (0..n).map(|_| score_sample(rng)).collect();
    Timepoint::new(
        LesionMask::new(grid.clone(), bits).unwrap(),
        Some(FlipMap::new(Volume::new(grid.clone(), flip).unwrap()).unwrap()),
        Some(ScoreMap::new(Volume::new(grid.clone(), score).unwrap()).unwrap()),
    )
    .unwrap()
}

/// A later timepoint sharing most voxels with `a`, so change maps are sparse
/// but non-trivial and components of assorted sizes appear.
pub fn perturbed(rng: &mut ChaCha8Rng, a: &Timepoint, rate: f64) -> Timepoint {
    let grid = a.mask.grid().clone();
    let mut bits = a.mask.bits().to_vec();
    let mut flip = a.flip.as_ref().unwrap().data().to_vec();
    let mut score = a.score.as_ref().unwrap().data().to_vec();
    for i in 0..bits.len() {
        if rng.gen_bool(rate) {
            bits[i] = !bits[i];
            flip[i] = flip_sample(rng);
            score[i] = score_sample(rng);
        }
    }
    Timepoint::new(
        LesionMask::new(grid.clone(), bits).unwrap(),
        Some(FlipMap::new(Volume::new(grid.clone(), flip).unwrap()).unwrap()),
        Some(ScoreMap::new(Volume::new(grid, score).unwrap()).unwrap()),
    )
    .unwrap()
}

pub fn pair(rng: &mut ChaCha8Rng) -> (Timepoint, Timepoint) {
    let grid = Grid::unit(DIMS).unwrap();
    let density = rng.gen_range(0.05..0.6);
    let a = random_timepoint(rng, &grid, density);
    let b = if rng.gen_bool(0.5) {
        let rate = rng.gen_range(0.05..0.5);
        perturbed(rng, &a, rate)
    } else {
        let density = rng.gen_range(0.05..0.6);
        random_timepoint(rng, &grid, density)
    };
    (a, b)
}

pub fn set_bits(mask: &LesionMask) -> Vec<usize> {
    mask.bits().iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}
