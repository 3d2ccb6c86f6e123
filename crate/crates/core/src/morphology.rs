//! 3D connected components over binary masks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LesionMask;

/// Voxel adjacency: face (6), face+edge (18) or face+edge+corner (26).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    pub const ALL: [Connectivity; 3] = [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix];

    pub fn neighbours(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// Whether offset `(dx, dy, dz)` (each in -1..=1, not all zero) is adjacent.
    pub fn admits(self, dx: i64, dy: i64, dz: i64) -> bool {
        let nonzero = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
        match self {
            Connectivity::Six => nonzero == 1,
            Connectivity::Eighteen => (1..=2).contains(&nonzero),
            Connectivity::TwentySix => nonzero >= 1,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::validation(format!(
                "connectivity must be 6, 18 or 26, got {other}"
            ))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.neighbours()
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("connectivity {s:?} is not 6, 18 or 26")))?;
        Connectivity::try_from(n)
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.neighbours())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    /// 0 for background, `1..=K` for components, in mask layout.
    pub labels: Vec<u32>,
    /// Voxel count of component `k` at position `k - 1`.
    pub sizes: Vec<usize>,
    pub connectivity: Connectivity,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Keeps the smaller index as root.
    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra < rb {
            self.parent[rb as usize] = ra;
        } else if rb < ra {
            self.parent[ra as usize] = rb;
        }
    }
}

/// Labels the foreground of a raw `dims`-shaped bit array. Components are
/// numbered in order of their smallest flattened voxel index.
pub fn label_bits(dims: [usize; 3], bits: &[bool], connectivity: Connectivity) -> ComponentLabeling {
    assert_eq!(bits.len(), dims[0] * dims[1] * dims[2], "bits do not match dims");
    assert!(bits.len() < u32::MAX as usize, "volume too large to label");
    let [nx, ny, nz] = dims.map(|d| d as i64);

    // Neighbours that precede a voxel in raster order.
    let mut backward = Vec::new();
    for dz in -1..=0i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let precedes = dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
                if precedes && connectivity.admits(dx, dy, dz) {
                    backward.push((dx, dy, dz));
                }
            }
        }
    }

    let mut set = DisjointSet {
        parent: (0..bits.len() as u32).collect(),
    };
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = (x + nx * (y + ny * z)) as usize;
                if !bits[i] {
                    continue;
                }
                for &(dx, dy, dz) in &backward {
                    let (qx, qy, qz) = (x + dx, y + dy, z + dz);
                    if qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny {
                        continue;
                    }
                    let j = (qx + nx * (qy + ny * qz)) as usize;
                    if bits[j] {
                        set.union(i as u32, j as u32);
                    }
                }
            }
        }
    }

    let mut labels = vec![0u32; bits.len()];
    let mut sizes = Vec::new();
    for i in 0..bits.len() {
        if !bits[i] {
            continue;
        }
        let root = set.find(i as u32) as usize;
        // Roots are the smallest index of their component, so the root has
        // already been visited (or is `i` itself).
        if root == i {
            sizes.push(0);
            labels[i] = sizes.len() as u32;
        } else {
            labels[i] = labels[root];
        }
        sizes[labels[i] as usize - 1] += 1;
    }
    ComponentLabeling {
        labels,
        sizes,
        connectivity,
    }
}

pub fn label_components(mask: &LesionMask, connectivity: Connectivity) -> ComponentLabeling {
    label_bits(mask.grid().dims(), mask.bits(), connectivity)
}

/// Drops every component with fewer than `min_voxels` voxels.
pub fn filter_small_components(
    mask: &LesionMask,
    min_voxels: usize,
    connectivity: Connectivity,
) -> LesionMask {
    if min_voxels <= 1 {
        return mask.clone();
    }
    let labeling = label_components(mask, connectivity);
    let bits = labeling
        .labels
        .iter()
        .map(|&l| l != 0 && labeling.sizes[l as usize - 1] >= min_voxels)
        .collect();
    LesionMask::new(mask.grid().clone(), bits).expect("same grid")
}

pub fn lesion_count(mask: &LesionMask, connectivity: Connectivity) -> usize {
    label_components(mask, connectivity).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;
    use lesion_change_oracles::flood_fill;
    use proptest::prelude::*;

    fn mask_from(dims: [usize; 3], voxels: &[[usize; 3]]) -> LesionMask {
        let grid = Grid::unit(dims).unwrap();
        let mut bits = vec![false; grid.len()];
        for &[x, y, z] in voxels {
            bits[grid.index(x, y, z)] = true;
        }
        LesionMask::new(grid, bits).unwrap()
    }

    fn line(n: usize) -> Vec<[usize; 3]> {
        (0..n).map(|i| [i % 16, i / 16, 0]).collect()
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = mask_from([4, 4, 4], &[]);
        assert_eq!(label_components(&m, Connectivity::TwentySix).count(), 0);
        assert_eq!(lesion_count(&m, Connectivity::Six), 0);
    }

    #[test]
    fn corner_contact_depends_on_connectivity() {
        let m = mask_from([3, 3, 3], &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(lesion_count(&m, Connectivity::TwentySix), 1);
        assert_eq!(lesion_count(&m, Connectivity::Eighteen), 2);
        assert_eq!(lesion_count(&m, Connectivity::Six), 2);
        let edge = mask_from([3, 3, 3], &[[0, 0, 0], [1, 1, 0]]);
        assert_eq!(lesion_count(&edge, Connectivity::Eighteen), 1);
        assert_eq!(lesion_count(&edge, Connectivity::Six), 2);
    }

    #[test]
    fn two_blocks_count_two() {
        let mut voxels = Vec::new();
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..3 {
                    voxels.push([x, y, z]);
                    voxels.push([x + 5, y + 5, z + 5]);
                }
            }
        }
        let m = mask_from([10, 10, 10], &voxels);
        let l = label_components(&m, Connectivity::TwentySix);
        assert_eq!(l.sizes, vec![27, 27]);
    }

    #[test]
    fn labels_follow_smallest_index() {
        // Component B's first voxel precedes component A's in raster order
        // even though A extends further.
        let m = mask_from([4, 4, 1], &[[3, 0, 0], [0, 2, 0], [0, 3, 0], [3, 1, 0]]);
        let l = label_components(&m, Connectivity::Six);
        assert_eq!(l.labels[3], 1);
        assert_eq!(l.labels[8], 2);
        assert_eq!(l.sizes, vec![2, 2]);
    }

    #[test]
    fn u_shape_merges_late() {
        // Two arms that only join on the last row exercise union of two
        // provisional trees.
        let m = mask_from(
            [3, 3, 1],
            &[[0, 0, 0], [2, 0, 0], [0, 1, 0], [2, 1, 0], [0, 2, 0], [1, 2, 0], [2, 2, 0]],
        );
        let l = label_components(&m, Connectivity::Six);
        assert_eq!(l.sizes, vec![7]);
    }

    #[test]
    fn filter_boundary_is_strict_fewer_than() {
        let eleven = mask_from([16, 2, 1], &line(11));
        assert!(filter_small_components(&eleven, 12, Connectivity::TwentySix).is_empty());
        let twelve = mask_from([16, 2, 1], &line(12));
        assert_eq!(filter_small_components(&twelve, 12, Connectivity::TwentySix), twelve);
    }

    #[test]
    fn filter_keeps_only_large() {
        let mut voxels: Vec<[usize; 3]> = (0..5).map(|x| [x, 0, 0]).collect();
        voxels.extend((0..16).map(|x| [x, 4, 0]));
        voxels.extend((0..4).map(|x| [x, 5, 0]));
        let m = mask_from([16, 8, 1], &voxels);
        let out = filter_small_components(&m, 12, Connectivity::TwentySix);
        assert_eq!(out.count(), 20);
        assert!(!out.get(0, 0, 0));
        assert!(out.get(0, 5, 0));
    }

    fn arb_mask() -> impl Strategy<Value = (Vec<bool>, u8)> {
        (prop::collection::vec(prop::bool::weighted(0.35), 6 * 5 * 4), prop::sample::select(vec![6u8, 18, 26]))
    }

    proptest! {
        #[test]
        fn matches_flood_fill((bits, conn) in arb_mask()) {
            let dims = [6, 5, 4];
            let c = Connectivity::try_from(conn).unwrap();
            let l = label_bits(dims, &bits, c);
            let oracle = flood_fill(dims, &bits, conn);
            prop_assert_eq!(l.labels, oracle.labels);
            prop_assert_eq!(l.sizes, oracle.sizes);
        }

        #[test]
        fn filter_is_idempotent_and_monotone((bits, conn) in arb_mask(), a in 0usize..10, b in 0usize..10) {
            let grid = Grid::unit([6, 5, 4]).unwrap();
            let m = LesionMask::new(grid, bits).unwrap();
            let c = Connectivity::try_from(conn).unwrap();
            let once = filter_small_components(&m, a, c);
            prop_assert_eq!(filter_small_components(&once, a, c), once.clone());
            let (lo, hi) = (a.min(b), a.max(b));
            let small = filter_small_components(&m, lo, c);
            let large = filter_small_components(&m, hi, c);
            prop_assert!(large.count() <= small.count());
            prop_assert!(lesion_count(&large, c) <= lesion_count(&small, c));
            prop_assert!(large.bits().iter().zip(small.bits()).all(|(l, s)| !l || *s));
        }
    }
}
