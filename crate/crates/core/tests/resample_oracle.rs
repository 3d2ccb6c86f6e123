//! Resampling against an explicit trilinear sum, plus grid coverage.

use lesion_change::grid_ops::{
    covering_grid, default_grid, resample, resample_mask, Interpolation, RigidTransform,
};
use lesion_change::{Grid, LesionMask, Volume};
use lesion_change_oracles::trilinear;
use nalgebra::{Matrix4, Rotation3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_volume(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Volume {
    let grid = Grid::unit(dims).unwrap();
    let n = grid.len();
    Volume::new(grid, (0..n).map(|_| rng.gen_range(0.0f32..1.0)).collect()).unwrap()
}

#[test]
fn translated_trilinear_matches_explicit_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..20 {
        let vol = random_volume(&mut rng, [7, 6, 5]);
        let t = [0; 3].map(|_| rng.gen_range(-0.9..0.9));
        let tf = RigidTransform::translation(t);
        let out = resample(&vol, vol.grid(), &tf, Interpolation::Trilinear, 0.0).unwrap();
        let dims = vol.grid().dims();
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    // Source position of this output voxel.
                    let p = [x as f64 - t[0], y as f64 - t[1], z as f64 - t[2]];
                    let inside = (0..3).all(|a| p[a] >= 0.0 && p[a] <= (dims[a] - 1) as f64);
                    let all_neighbours = (0..3).all(|a| p[a].floor() + 1.0 <= (dims[a] - 1) as f64);
                    if inside && all_neighbours {
                        let want = trilinear(dims, vol.data(), p);
                        let got = f64::from(out.get(x, y, z));
                        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
                    }
                }
            }
        }
    }
}

#[test]
fn step_edge_stays_within_neighbour_range() {
    let dims = [10, 4, 4];
    let grid = Grid::unit(dims).unwrap();
    let data: Vec<f32> = (0..grid.len())
        .map(|i| if grid.coords(i)[0] < 5 { 0.0 } else { 1.0 })
        .collect();
    let vol = Volume::new(grid.clone(), data).unwrap();
    let out = resample(&vol, &grid, &RigidTransform::translation([0.25, 0.0, 0.0]), Interpolation::Trilinear, 0.0)
        .unwrap();
    for x in 1..dims[0] {
        let v = out.get(x, 1, 1);
        assert!((0.0..=1.0).contains(&v));
    }
    // Output x=5 samples source 4.75: three quarters of the way onto the step.
    assert!((out.get(5, 1, 1) - 0.75).abs() < 1e-6);
    assert_eq!(out.get(2, 1, 1), 0.0);
    assert_eq!(out.get(8, 1, 1), 1.0);
}

#[test]
fn nearest_mask_resampling_stays_binary() {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let grid = Grid::unit([9, 9, 9]).unwrap();
    let mask = LesionMask::new(grid.clone(), (0..729).map(|_| rng.gen_bool(0.3)).collect()).unwrap();
    let rot = Rotation3::from_euler_angles(0.3, -0.2, 0.5);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
    let tf = RigidTransform::new(m).unwrap();
    let target = covering_grid(&[(&grid, &tf)], 1.0).unwrap();
    let out = resample_mask(&mask, &target, &tf).unwrap();
    assert!(out.count() > 0);
}

#[test]
fn identity_resampling_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let vol = random_volume(&mut rng, [5, 5, 5]);
    for interp in [Interpolation::Nearest, Interpolation::Trilinear] {
        let out = resample(&vol, vol.grid(), &RigidTransform::identity(), interp, 0.0).unwrap();
        assert_eq!(out, vol);
    }
}

#[test]
fn default_grid_covers_every_input_voxel_centre() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    for _ in 0..30 {
        let dims = [0; 3].map(|_| rng.gen_range(2..10));
        let spacing = [0; 3].map(|_| rng.gen_range(0.5..2.5));
        let rot = Rotation3::from_euler_angles(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-3.0..3.0),
        );
        let mut affine = Matrix4::identity();
        for c in 0..3 {
            for r in 0..3 {
                affine[(r, c)] = rot.matrix()[(r, c)] * spacing[c];
            }
            affine[(c, 3)] = rng.gen_range(-50.0..50.0);
        }
        let grid = Grid::new(dims, spacing, affine).unwrap();
        let vol = Volume::filled(grid.clone(), 1.0);
        let target = default_grid(&[&vol], 1.0).unwrap();
        let inv = target.affine().try_inverse().unwrap();
        let tdims = target.dims();
        for corner in 0..8 {
            let ijk = [0, 1, 2].map(|a| if (corner >> a) & 1 == 1 { (dims[a] - 1) as f64 } else { 0.0 });
            let w = grid.index_to_world(ijk);
            let c = inv * Vector4::new(w[0], w[1], w[2], 1.0);
            for a in 0..3 {
                assert!(c[a] >= -1e-6 && c[a] <= (tdims[a] - 1) as f64 + 1e-6, "axis {a}: {}", c[a]);
            }
        }
    }
}

#[test]
fn default_grid_pads_a_unit_cube() {
    let vol = Volume::filled(Grid::unit([10, 10, 10]).unwrap(), 0.0);
    let g = default_grid(&[&vol], 1.0).unwrap();
    assert_eq!(g.dims(), [14, 14, 14]);
    assert_eq!(g.index_to_world([0.0, 0.0, 0.0]), [-2.0, -2.0, -2.0]);
}
