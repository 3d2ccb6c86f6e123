//! Exact Euclidean distance from a point to an axis-aligned ellipsoid
//! surface, by bisection on the Lagrange-multiplier root (Eberly, "Distance
//! from a Point to an Ellipse, an Ellipsoid, or a Hyperellipsoid").

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub radii: [f64; 3],
}

impl Ellipsoid {
    pub fn max_radius(&self) -> f64 {
        self.radii.iter().cloned().fold(0.0, f64::max)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3)
            .map(|a| ((p[a] - self.center[a]) / self.radii[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }

    /// Distance to the surface; positive inside, negative outside.
    pub fn signed_depth(&self, p: [f64; 3]) -> f64 {
        let local = [
            (p[0] - self.center[0]).abs(),
            (p[1] - self.center[1]).abs(),
            (p[2] - self.center[2]).abs(),
        ];
        // Sort axes by decreasing radius, carrying the coordinates along.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| self.radii[b].total_cmp(&self.radii[a]));
        let e = order.map(|a| self.radii[a]);
        let y = order.map(|a| local[a]);
        let d = distance_3d(e, y);
        if self.contains(p) {
            d
        } else {
            -d
        }
    }
}

fn robust_length(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(0.0, f64::max);
    if m == 0.0 {
        0.0
    } else {
        m * v.iter().map(|x| (x / m).powi(2)).sum::<f64>().sqrt()
    }
}

/// Bisects on `s` until the interval stops shrinking in floating point.
fn bisect(mut s0: f64, mut s1: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut s = s0;
    for _ in 0..2048 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let v = g(s);
        if v > 0.0 {
            s0 = s;
        } else if v < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// `e0 >= e1 > 0`, `y0, y1 >= 0`.
fn distance_2d(e: [f64; 2], y: [f64; 2]) -> f64 {
    let [e0, e1] = e;
    let [y0, y1] = y;
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1).powi(2);
            let n0 = r0 * z0;
            let s1 = if g < 0.0 { 0.0 } else { robust_length(&[n0, z1]) - 1.0 };
            let s = bisect(z1 - 1.0, s1, |s| {
                let a = n0 / (s + r0);
                let b = z1 / (s + 1.0);
                a * a + b * b - 1.0
            });
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            ((x0 - y0).powi(2) + (x1 - y1).powi(2)).sqrt()
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).sqrt();
            ((x0 - y0).powi(2) + x1 * x1).sqrt()
        } else {
            (y0 - e0).abs()
        }
    }
}

/// `e0 >= e1 >= e2 > 0`, all `y >= 0`.
fn distance_3d(e: [f64; 3], y: [f64; 3]) -> f64 {
    let [e0, e1, e2] = e;
    let [y0, y1, y2] = y;
    if y2 > 0.0 {
        if y1 > 0.0 {
            if y0 > 0.0 {
                let z = [y0 / e0, y1 / e1, y2 / e2];
                let g = z[0] * z[0] + z[1] * z[1] + z[2] * z[2] - 1.0;
                if g == 0.0 {
                    return 0.0;
                }
                let r0 = (e0 / e2).powi(2);
                let r1 = (e1 / e2).powi(2);
                let n0 = r0 * z[0];
                let n1 = r1 * z[1];
                let s1 = if g < 0.0 {
                    0.0
                } else {
                    robust_length(&[n0, n1, z[2]]) - 1.0
                };
                let s = bisect(z[2] - 1.0, s1, |s| {
                    let a = n0 / (s + r0);
                    let b = n1 / (s + r1);
                    let c = z[2] / (s + 1.0);
                    a * a + b * b + c * c - 1.0
                });
                let x0 = r0 * y0 / (s + r0);
                let x1 = r1 * y1 / (s + r1);
                let x2 = y2 / (s + 1.0);
                ((x0 - y0).powi(2) + (x1 - y1).powi(2) + (x2 - y2).powi(2)).sqrt()
            } else {
                distance_2d([e1, e2], [y1, y2])
            }
        } else if y0 > 0.0 {
            distance_2d([e0, e2], [y0, y2])
        } else {
            (y2 - e2).abs()
        }
    } else {
        let denom0 = e0 * e0 - e2 * e2;
        let denom1 = e1 * e1 - e2 * e2;
        let numer0 = e0 * y0;
        let numer1 = e1 * y1;
        if numer0 < denom0 && numer1 < denom1 {
            let xde0 = numer0 / denom0;
            let xde1 = numer1 / denom1;
            let discr = 1.0 - xde0 * xde0 - xde1 * xde1;
            if discr > 0.0 {
                let x0 = e0 * xde0;
                let x1 = e1 * xde1;
                let x2 = e2 * discr.sqrt();
                return ((x0 - y0).powi(2) + (x1 - y1).powi(2) + x2 * x2).sqrt();
            }
        }
        distance_2d([e0, e1], [y0, y1])
    }
}
