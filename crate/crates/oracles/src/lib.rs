//! Slow, obviously-correct reference implementations. Test code compares the
//! library against these; nothing here depends on the library itself.

use std::collections::VecDeque;

pub struct Labeling {
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

fn adjacent(dx: i64, dy: i64, dz: i64, connectivity: u8) -> bool {
    let manhattan = dx.abs() + dy.abs() + dz.abs();
    match connectivity {
        6 => manhattan == 1,
        18 => manhattan == 1 || manhattan == 2,
        26 => manhattan >= 1,
        other => panic!("bad connectivity {other}"),
    }
}

/// Breadth-first flood fill started from every unvisited foreground voxel in
/// raster order, so component `k` is the one containing the `k`-th seed.
pub fn flood_fill(dims: [usize; 3], bits: &[bool], connectivity: u8) -> Labeling {
    let [nx, ny, nz] = dims.map(|d| d as i64);
    let idx = |x: i64, y: i64, z: i64| (x + nx * (y + ny * z)) as usize;
    let mut labels = vec![0u32; bits.len()];
    let mut sizes = Vec::new();
    for seed in 0..bits.len() {
        if !bits[seed] || labels[seed] != 0 {
            continue;
        }
        sizes.push(0usize);
        let label = sizes.len() as u32;
        labels[seed] = label;
        let mut queue = VecDeque::from([seed]);
        while let Some(i) = queue.pop_front() {
            sizes[label as usize - 1] += 1;
            let (x, y, z) = (
                i as i64 % nx,
                (i as i64 / nx) % ny,
                i as i64 / (nx * ny),
            );
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if !adjacent(dx, dy, dz, connectivity) {
                            continue;
                        }
                        let (qx, qy, qz) = (x + dx, y + dy, z + dz);
                        if qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny || qz >= nz {
                            continue;
                        }
                        let j = idx(qx, qy, qz);
                        if bits[j] && labels[j] == 0 {
                            labels[j] = label;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
    }
    Labeling { labels, sizes }
}

/// Keeps voxels whose flood-fill component has at least `min_voxels` voxels.
pub fn size_filter(dims: [usize; 3], bits: &[bool], min_voxels: usize, connectivity: u8) -> Vec<bool> {
    let l = flood_fill(dims, bits, connectivity);
    l.labels
        .iter()
        .map(|&k| k != 0 && l.sizes[k as usize - 1] >= min_voxels)
        .collect()
}

/// Per-voxel confidence under the three change rules:
/// `Some(true)` confident lesion, `Some(false)` confident non-lesion, `None`
/// uncertain.
pub fn flip_confidence(in_mask: bool, flip: f32, q: f64) -> Option<bool> {
    if f64::from(flip) < q {
        Some(in_mask)
    } else {
        None
    }
}

pub fn margin_confidence(score: f32, m: f64) -> Option<bool> {
    let p = f64::from(score);
    if p > 0.5 + m {
        Some(true)
    } else if p < 0.5 - m {
        Some(false)
    } else {
        None
    }
}

/// Raw new / missing voxel sets by direct enumeration over per-voxel
/// confidences of the two timepoints.
pub fn enumerate_change(a: &[Option<bool>], b: &[Option<bool>]) -> (Vec<bool>, Vec<bool>) {
    let new = a
        .iter()
        .zip(b)
        .map(|(a, b)| *a == Some(false) && *b == Some(true))
        .collect();
    let missing = a
        .iter()
        .zip(b)
        .map(|(a, b)| *a == Some(true) && *b == Some(false))
        .collect();
    (new, missing)
}

/// Probability that a random positive outranks a random negative, ties ½,
/// over every positive × negative pair.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// (tn, fp, fn, tp) with "positive" meaning value > 0.
pub fn confusion_counts(values: &[f64], labels: &[bool]) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&v, &l) in values.iter().zip(labels) {
        match (v > 0.0, l) {
            (false, false) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, true) => c.2 += 1,
            (true, true) => c.3 += 1,
        }
    }
    c
}

/// Trilinear sample as an explicit weighted sum over the 8 neighbours of a
/// continuous index that lies strictly inside the lattice.
pub fn trilinear(dims: [usize; 3], data: &[f32], p: [f64; 3]) -> f64 {
    let x0 = p[0].floor() as usize;
    let y0 = p[1].floor() as usize;
    let z0 = p[2].floor() as usize;
    let (fx, fy, fz) = (p[0] - x0 as f64, p[1] - y0 as f64, p[2] - z0 as f64);
    let at = |x: usize, y: usize, z: usize| f64::from(data[x + dims[0] * (y + dims[1] * z)]);
    at(x0, y0, z0) * (1.0 - fx) * (1.0 - fy) * (1.0 - fz)
        + at(x0 + 1, y0, z0) * fx * (1.0 - fy) * (1.0 - fz)
        + at(x0, y0 + 1, z0) * (1.0 - fx) * fy * (1.0 - fz)
        + at(x0 + 1, y0 + 1, z0) * fx * fy * (1.0 - fz)
        + at(x0, y0, z0 + 1) * (1.0 - fx) * (1.0 - fy) * fz
        + at(x0 + 1, y0, z0 + 1) * fx * (1.0 - fy) * fz
        + at(x0, y0 + 1, z0 + 1) * (1.0 - fx) * fy * fz
        + at(x0 + 1, y0 + 1, z0 + 1) * fx * fy * fz
}
