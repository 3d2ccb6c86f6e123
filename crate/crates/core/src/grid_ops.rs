//! Resampling onto a common template-space grid.
//!
//! Registration itself happens elsewhere; this module only applies the
//! resulting rigid transforms. Each map is resampled exactly once per
//! timepoint, from its native grid straight onto the target grid.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{FlipMap, Grid, LesionMask, ScoreMap, TargetGrid, Volume};

const ORTHONORMAL_TOLERANCE: f64 = 1e-4;
/// Continuous indices this close to an integer are snapped onto it.
const SNAP: f64 = 1e-6;
/// Voxels of padding added on each side by [`default_grid`].
pub const GRID_PADDING: usize = 2;

/// Fill for samples outside the field of view.
pub const MASK_FILL: f32 = 0.0;
pub const SCORE_FILL: f32 = 0.0;
/// Outside the scanned field nothing is known, so flip probability is maximal.
pub const FLIP_FILL: f32 = 0.5;

/// Maps world coordinates (mm) of a moving timepoint into template space.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    matrix: Matrix4<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            matrix: Matrix4::identity(),
        }
    }

    pub fn new(matrix: Matrix4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("transform contains non-finite entries"));
        }
        let last = matrix.row(3);
        if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
            return Err(Error::validation("transform last row must be (0, 0, 0, 1)"));
        }
        let rotation: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let gram_error = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if gram_error > ORTHONORMAL_TOLERANCE {
            return Err(Error::validation(format!(
                "transform rotation is not orthonormal (error {gram_error:.2e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(Error::validation(format!(
                "transform rotation has determinant {det}, expected +1"
            )));
        }
        Ok(RigidTransform { matrix })
    }

    /// Pure translation by `offset` mm.
    pub fn translation(offset: [f64; 3]) -> Self {
        let mut matrix = Matrix4::identity();
        for axis in 0..3 {
            matrix[(axis, 3)] = offset[axis];
        }
        RigidTransform { matrix }
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == Matrix4::identity()
    }

    /// Exact inverse `[Rᵀ | -Rᵀ t]`.
    pub fn inverse(&self) -> Matrix4<f64> {
        let rt: Matrix3<f64> = self.matrix.fixed_view::<3, 3>(0, 0).transpose();
        let t = self.matrix.fixed_view::<3, 1>(0, 3).into_owned();
        let back = -(rt * t);
        let mut inv = Matrix4::identity();
        inv.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        inv.fixed_view_mut::<3, 1>(0, 3).copy_from(&back);
        inv
    }

    /// Parses 16 whitespace-separated numbers, row-major.
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::validation(format!("transform entry {tok:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != 16 {
            return Err(Error::validation(format!(
                "transform needs 16 numbers, found {}",
                values.len()
            )));
        }
        RigidTransform::new(Matrix4::from_row_slice(&values))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in 0..4 {
            let row: Vec<String> = (0..4).map(|c| format!("{}", self.matrix[(r, c)])).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Nearest,
    Trilinear,
}

fn snap(c: f64) -> f64 {
    let r = c.round();
    if (c - r).abs() < SNAP {
        r
    } else {
        c
    }
}

/// Output-index → input-index map: `A_in⁻¹ · T⁻¹ · A_out`.
fn index_map(input: &Grid, target: &Grid, transform: &RigidTransform) -> Result<Matrix4<f64>> {
    let input_inv = input
        .affine()
        .try_inverse()
        .ok_or_else(|| Error::validation("input affine is singular"))?;
    Ok(input_inv * transform.inverse() * target.affine())
}

/// Resamples `volume` onto `grid`. Each output voxel is computed
/// independently from the input, so the result does not depend on thread
/// scheduling.
pub fn resample(
    volume: &Volume,
    grid: &TargetGrid,
    transform: &RigidTransform,
    interp: Interpolation,
    fill: f32,
) -> Result<Volume> {
    if transform.is_identity() && volume.grid() == grid {
        return Ok(volume.clone());
    }
    let map = index_map(volume.grid(), grid, transform)?;
    let dims = grid.dims();
    let plane = dims[0] * dims[1];
    let mut out = vec![0f32; grid.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = map * Vector4::new(x as f64, y as f64, z as f64, 1.0);
                let c = [snap(p[0]), snap(p[1]), snap(p[2])];
                slab[x + dims[0] * y] = match interp {
                    Interpolation::Nearest => sample_nearest(volume, c, fill),
                    Interpolation::Trilinear => sample_trilinear(volume, c, fill),
                };
            }
        }
    });
    Volume::new(grid.clone(), out)
}

fn sample_nearest(volume: &Volume, c: [f64; 3], fill: f32) -> f32 {
    let dims = volume.grid().dims();
    let mut idx = [0usize; 3];
    for axis in 0..3 {
        let r = (c[axis] + 0.5).floor();
        if r < 0.0 || r >= dims[axis] as f64 {
            return fill;
        }
        idx[axis] = r as usize;
    }
    volume.get(idx[0], idx[1], idx[2])
}

/// Trilinear blend of the 8 surrounding voxels. Points farther than half a
/// voxel outside the lattice get `fill`; neighbours off the lattice
/// contribute `fill`. Zero-weight neighbours are skipped so lattice-aligned
/// samples reproduce the input bit for bit.
fn sample_trilinear(volume: &Volume, c: [f64; 3], fill: f32) -> f32 {
    let dims = volume.grid().dims();
    let mut base = [0i64; 3];
    let mut frac = [0f64; 3];
    for axis in 0..3 {
        if c[axis] < -0.5 || c[axis] > dims[axis] as f64 - 0.5 {
            return fill;
        }
        let f = c[axis].floor();
        base[axis] = f as i64;
        frac[axis] = c[axis] - f;
    }
    let mut acc: Option<f64> = None;
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for corner in 0..8 {
        let mut weight = 1.0;
        let mut idx = [0i64; 3];
        for axis in 0..3 {
            let upper = (corner >> axis) & 1 == 1;
            weight *= if upper { frac[axis] } else { 1.0 - frac[axis] };
            idx[axis] = base[axis] + upper as i64;
        }
        if weight == 0.0 {
            continue;
        }
        let inside = (0..3).all(|a| idx[a] >= 0 && idx[a] < dims[a] as i64);
        let v = if inside {
            volume.get(idx[0] as usize, idx[1] as usize, idx[2] as usize)
        } else {
            fill
        };
        lo = lo.min(v);
        hi = hi.max(v);
        let term = weight * f64::from(v);
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    match acc {
        Some(a) => (a as f32).clamp(lo, hi),
        None => fill,
    }
}

pub fn resample_mask(
    mask: &LesionMask,
    grid: &TargetGrid,
    transform: &RigidTransform,
) -> Result<LesionMask> {
    let v = resample(&mask.to_volume(), grid, transform, Interpolation::Nearest, MASK_FILL)?;
    LesionMask::from_volume(&v)
}

pub fn resample_flip(
    flip: &FlipMap,
    grid: &TargetGrid,
    transform: &RigidTransform,
) -> Result<FlipMap> {
    let v = resample(flip.volume(), grid, transform, Interpolation::Trilinear, FLIP_FILL)?;
    FlipMap::new(v)
}

pub fn resample_score(
    score: &ScoreMap,
    grid: &TargetGrid,
    transform: &RigidTransform,
) -> Result<ScoreMap> {
    let v = resample(score.volume(), grid, transform, Interpolation::Trilinear, SCORE_FILL)?;
    ScoreMap::new(v)
}

/// Axis-aligned grid at `spacing` mm covering every voxel centre of every
/// input, padded by [`GRID_PADDING`] voxels per side.
pub fn default_grid(volumes: &[&Volume], spacing: f64) -> Result<TargetGrid> {
    let identity = RigidTransform::identity();
    let fields: Vec<(&Grid, &RigidTransform)> =
        volumes.iter().map(|v| (v.grid(), &identity)).collect();
    covering_grid(&fields, spacing)
}

/// Like [`default_grid`], with each field first mapped into template space.
pub fn covering_grid(fields: &[(&Grid, &RigidTransform)], spacing: f64) -> Result<TargetGrid> {
    if fields.is_empty() {
        return Err(Error::validation("cannot build a grid from zero volumes"));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::validation(format!("grid spacing {spacing} must be positive")));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (grid, transform) in fields {
        let dims = grid.dims();
        for corner in 0..8 {
            let mut ijk = [0.0; 3];
            for axis in 0..3 {
                if (corner >> axis) & 1 == 1 {
                    ijk[axis] = (dims[axis] - 1) as f64;
                }
            }
            let w = grid.index_to_world(ijk);
            let t = transform.matrix() * Vector4::new(w[0], w[1], w[2], 1.0);
            for axis in 0..3 {
                lo[axis] = lo[axis].min(t[axis]);
                hi[axis] = hi[axis].max(t[axis]);
            }
        }
    }
    let pad = GRID_PADDING as f64 * spacing;
    let mut dims = [0usize; 3];
    let mut origin = [0.0; 3];
    for axis in 0..3 {
        let steps = ((hi[axis] - lo[axis]) / spacing - 1e-9).ceil().max(0.0) as usize;
        dims[axis] = steps + 1 + 2 * GRID_PADDING;
        origin[axis] = lo[axis] - pad;
    }
    Grid::axis_aligned(dims, [spacing; 3], origin)
}

/// The grid a set of timepoints is compared on. When every field already
/// shares one isotropic lattice at `spacing` and no transform is needed, that
/// lattice is used as-is; otherwise a padded covering grid is built.
pub fn common_grid(fields: &[(&Grid, &RigidTransform)], spacing: f64) -> Result<TargetGrid> {
    let Some((first, _)) = fields.first() else {
        return Err(Error::validation("cannot build a grid from zero volumes"));
    };
    let shared = fields
        .iter()
        .all(|(g, t)| t.is_identity() && g.matches(first, 1e-4));
    let isotropic = first
        .spacing()
        .iter()
        .all(|s| (s - spacing).abs() <= 1e-4 * spacing);
    if shared && isotropic {
        Ok((*first).clone())
    } else {
        covering_grid(fields, spacing)
    }
}
