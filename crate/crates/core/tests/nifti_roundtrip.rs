//! Write-then-read round trips over randomized volumes.

use lesion_change::nifti::{read_volume, write_volume, Datatype};
use lesion_change::{Grid, Volume};
use nalgebra::{Matrix4, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(rng: &mut ChaCha8Rng) -> Grid {
    let dims = [0; 3].map(|_| rng.gen_range(1..12));
    let spacing = [0; 3].map(|_| rng.gen_range(0.3..3.0));
    let rot = Rotation3::from_euler_angles(
        rng.gen_range(-3.1..3.1),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-3.1..3.1),
    );
    let mut affine = Matrix4::identity();
    for c in 0..3 {
        let col = rot.matrix().column(c) * spacing[c];
        for r in 0..3 {
            affine[(r, c)] = col[r];
        }
    }
    let t = Vector3::new(
        rng.gen_range(-100.0..100.0),
        rng.gen_range(-100.0..100.0),
        rng.gen_range(-100.0..100.0),
    );
    for r in 0..3 {
        affine[(r, 3)] = t[r];
    }
    Grid::new(dims, spacing, affine).unwrap()
}

#[test]
fn randomized_volumes_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for case in 0..50 {
        let grid = random_grid(&mut rng);
        let n = grid.len();
        for dt in [Datatype::Uint8, Datatype::Float32] {
            let data: Vec<f32> = match dt {
                Datatype::Uint8 => (0..n).map(|_| rng.gen_range(0..=255) as f32).collect(),
                _ => (0..n)
                    .map(|_| match rng.gen_range(0..8) {
                        0 => -0.0,
                        1 => f32::MIN_POSITIVE,
                        2 => f32::MAX,
                        _ => rng.gen_range(-1e4f32..1e4),
                    })
                    .collect(),
            };
            let vol = Volume::new(grid.clone(), data).unwrap();
            for ext in ["nii", "nii.gz"] {
                let path = dir.path().join(format!("case{case}_{}.{ext}", dt.code()));
                write_volume(&vol, &path, dt).unwrap();
                let back = read_volume(&path).unwrap();
                assert_eq!(back.grid().dims(), grid.dims());
                let bits = |v: &Volume| v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(&back), bits(&vol), "case {case} {ext}");
                let scale = grid.affine().abs().max().max(1.0);
                let err = (back.grid().affine() - grid.affine()).abs().max();
                assert!(err <= 1e-6 * scale, "case {case}: affine error {err}");
            }
        }
    }
}

#[test]
fn gzip_and_plain_decode_identically() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::unit([3, 4, 5]).unwrap();
    let vol = Volume::new(grid, (0..60).map(|i| i as f32 * 0.5).collect()).unwrap();
    let plain = dir.path().join("a.nii");
    let gz = dir.path().join("a.nii.gz");
    write_volume(&vol, &plain, Datatype::Float32).unwrap();
    write_volume(&vol, &gz, Datatype::Float32).unwrap();
    assert_eq!(read_volume(&plain).unwrap(), read_volume(&gz).unwrap());
    assert_eq!(std::fs::metadata(&plain).unwrap().len(), 352 + 60 * 4);
}
