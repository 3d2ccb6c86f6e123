//! In-memory volumetric grids and the typed maps built on them.
//!
//! Every volume in the crate uses the same flattened layout:
//! `index = x + dims[0] * (y + dims[1] * z)`, i.e. `x` varies fastest. This
//! is also the on-disk order of NIfTI-1 voxel data.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

/// Relative tolerance between affine column norms and voxel spacing.
pub const SPACING_TOLERANCE: f64 = 1e-4;

/// Sampling lattice of a volume: size, voxel spacing and grid-to-world map.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: Matrix4<f64>,
}

/// The common template-space lattice that all timepoints of a patient share.
pub type TargetGrid = Grid;

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], affine: Matrix4<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::validation(format!("grid dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::validation(format!(
                "grid spacing must be strictly positive, got {spacing:?}"
            )));
        }
        if affine.iter().any(|a| !a.is_finite()) {
            return Err(Error::validation("affine contains non-finite entries"));
        }
        let last = affine.row(3);
        if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(Error::validation("affine last row must be (0, 0, 0, 1)"));
        }
        let norms = column_norms(&affine);
        for axis in 0..3 {
            let rel = (norms[axis] - spacing[axis]).abs() / spacing[axis];
            if rel > SPACING_TOLERANCE {
                return Err(Error::validation(format!(
                    "affine column {axis} has norm {} but spacing is {}",
                    norms[axis], spacing[axis]
                )));
            }
        }
        Ok(Grid {
            dims,
            spacing,
            affine,
        })
    }

    /// Axis-aligned grid whose voxel `(0, 0, 0)` sits at `origin` (world mm).
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let mut affine = Matrix4::identity();
        for axis in 0..3 {
            affine[(axis, axis)] = spacing[axis];
            affine[(axis, 3)] = origin[axis];
        }
        Grid::new(dims, spacing, affine)
    }

    /// 1 mm isotropic grid with identity affine.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Grid::axis_aligned(dims, [1.0; 3], [0.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &Matrix4<f64> {
        &self.affine
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    /// World position (mm) of a continuous grid index.
    pub fn index_to_world(&self, ijk: [f64; 3]) -> [f64; 3] {
        let w = self.affine * Vector4::new(ijk[0], ijk[1], ijk[2], 1.0);
        [w[0], w[1], w[2]]
    }

    /// Same lattice within `tol`: equal dims, and spacing / affine entries
    /// differing by at most `tol`.
    pub fn matches(&self, other: &Grid, tol: f64) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(other.spacing.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
            && self
                .affine
                .iter()
                .zip(other.affine.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

pub(crate) fn column_norms(affine: &Matrix4<f64>) -> [f64; 3] {
    let mut norms = [0.0; 3];
    for (axis, norm) in norms.iter_mut().enumerate() {
        *norm = (0..3)
            .map(|row| affine[(row, axis)].powi(2))
            .sum::<f64>()
            .sqrt();
    }
    norms
}

/// A scalar 3D image.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: Grid,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::validation(format!(
                "volume data has {} samples but dims {:?} need {}",
                data.len(),
                grid.dims(),
                grid.len()
            )));
        }
        Ok(Volume { grid, data })
    }

    pub fn filled(grid: Grid, value: f32) -> Self {
        let data = vec![value; grid.len()];
        Volume { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.grid.index(x, y, z)]
    }

    /// Minimum and maximum sample, ignoring NaN.
    pub fn range(&self) -> (f32, f32) {
        self.data
            .iter()
            .filter(|v| !v.is_nan())
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Binary lesion segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LesionMask {
    grid: Grid,
    bits: Vec<bool>,
}

// Grid holds f64s; masks compare lattices exactly.
impl Eq for Grid {}

impl LesionMask {
    pub fn new(grid: Grid, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.len() {
            return Err(Error::validation(format!(
                "mask has {} voxels but dims {:?} need {}",
                bits.len(),
                grid.dims(),
                grid.len()
            )));
        }
        Ok(LesionMask { grid, bits })
    }

    pub fn empty(grid: Grid) -> Self {
        let bits = vec![false; grid.len()];
        LesionMask { grid, bits }
    }

    /// Accepts only volumes whose samples are exactly 0 or 1.
    pub fn from_volume(volume: &Volume) -> Result<Self> {
        let mut bits = Vec::with_capacity(volume.data().len());
        for (i, &v) in volume.data().iter().enumerate() {
            match v {
                0.0 => bits.push(false),
                1.0 => bits.push(true),
                other => {
                    let [x, y, z] = volume.grid().coords(i);
                    return Err(Error::validation(format!(
                        "mask sample {other} at voxel ({x}, {y}, {z}) is not 0 or 1"
                    )));
                }
            }
        }
        Ok(LesionMask {
            grid: volume.grid().clone(),
            bits,
        })
    }

    pub fn to_volume(&self) -> Volume {
        let data = self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Volume {
            grid: self.grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.grid.index(x, y, z)]
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground volume in mm³.
    pub fn volume_mm3(&self) -> f64 {
        self.count() as f64 * self.grid.voxel_volume()
    }
}

macro_rules! bounded_map {
    ($(#[$meta:meta])* $name:ident, $lo:expr, $hi:expr, $nan_fill:expr, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Volume);

        impl $name {
            pub const MIN: f32 = $lo;
            pub const MAX: f32 = $hi;

            /// Rejects any sample outside the valid range.
            pub fn new(volume: Volume) -> Result<Self> {
                if let Some((i, v)) = volume
                    .data()
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !(Self::MIN..=Self::MAX).contains(*v))
                {
                    let [x, y, z] = volume.grid().coords(i);
                    return Err(Error::validation(format!(
                        concat!($what, " sample {} at voxel ({}, {}, {}) outside [{}, {}]"),
                        v, x, y, z, Self::MIN, Self::MAX
                    )));
                }
                Ok($name(volume))
            }

            /// Clamps out-of-range samples into range and returns how many
            /// were changed. NaN becomes the maximally uncertain value.
            pub fn clamped(mut volume: Volume) -> (Self, usize) {
                let mut changed = 0;
                for v in volume.data.iter_mut() {
                    if v.is_nan() {
                        *v = $nan_fill;
                        changed += 1;
                    } else if *v < Self::MIN {
                        *v = Self::MIN;
                        changed += 1;
                    } else if *v > Self::MAX {
                        *v = Self::MAX;
                        changed += 1;
                    }
                }
                ($name(volume), changed)
            }

            pub fn volume(&self) -> &Volume {
                &self.0
            }

            pub fn into_volume(self) -> Volume {
                self.0
            }

            pub fn grid(&self) -> &Grid {
                self.0.grid()
            }

            pub fn data(&self) -> &[f32] {
                self.0.data()
            }
        }
    };
}

bounded_map!(
    /// Per-voxel label-flip probability, in `[0, 0.5]`.
    FlipMap, 0.0, 0.5, 0.5, "flip"
);
bounded_map!(
    /// Per-voxel classifier score, in `[0, 1]`.
    ScoreMap, 0.0, 1.0, 0.5, "score"
);
