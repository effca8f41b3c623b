//! Strictly convex holes `D` removed from the plane or space.

use std::f64::consts::{PI, TAU};

use crate::error::{invalid, Result};
use crate::rhs::norm;

#[derive(Clone, Debug, PartialEq)]
pub enum InnerDomain {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Planar ellipse with semi-axes `(a, b)` rotated by `angle`.
    Ellipse {
        center: [f64; 2],
        semi_axes: (f64, f64),
        angle: f64,
    },
}

/// A point of `∂D` with its outward unit normal and smallest principal curvature.
#[derive(Clone, Debug)]
pub struct BoundaryPoint {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub curvature: f64,
}

impl InnerDomain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(center.len() == 2 || center.len() == 3) {
            return invalid("ball center must have 2 or 3 coordinates");
        }
        if !(radius > 0.0) {
            return invalid("ball radius must be positive");
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn ellipse(center: [f64; 2], semi_axes: (f64, f64), angle: f64) -> Result<Self> {
        if !(semi_axes.0 > 0.0 && semi_axes.1 > 0.0) {
            return invalid("ellipse semi-axes must be positive");
        }
        Ok(Self::Ellipse {
            center,
            semi_axes,
            angle,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ball { center, .. } => center.len(),
            Self::Ellipse { .. } => 2,
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Self::Ball { center, .. } => center.clone(),
            Self::Ellipse { center, .. } => center.to_vec(),
        }
    }

    /// Coordinates in which the domain is the unit ball: returns `(p, scale)`
    /// where `p` is the normalized point.
    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, c)| (a - c) / radius).collect()
            }
            Self::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let (s, c) = angle.sin_cos();
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                vec![u / semi_axes.0, v / semi_axes.1]
            }
        }
    }

    fn to_unit_dir(&self, w: &[f64]) -> Vec<f64> {
        match self {
            Self::Ball { radius, .. } => w.iter().map(|a| a / radius).collect(),
            Self::Ellipse {
                semi_axes, angle, ..
            } => {
                let (s, c) = angle.sin_cos();
                let u = c * w[0] + s * w[1];
                let v = -s * w[0] + c * w[1];
                vec![u / semi_axes.0, v / semi_axes.1]
            }
        }
    }

    /// Closed-set membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        let p = self.to_unit(x);
        p.iter().map(|v| v * v).sum::<f64>() <= 1.0
    }

    /// Signed Euclidean distance to `∂D`, negative inside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Self::Ball { center, radius } => {
                let d: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                d - radius
            }
            Self::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let (s, c) = angle.sin_cos();
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                let (a, b) = *semi_axes;
                let (e0, e1, y0, y1) = if a >= b {
                    (a, b, u.abs(), v.abs())
                } else {
                    (b, a, v.abs(), u.abs())
                };
                let dist = distance_to_ellipse(e0, e1, y0, y1);
                if self.contains(x) {
                    -dist
                } else {
                    dist
                }
            }
        }
    }

    /// First parameter `s > 0` where `x + s w` meets `∂D`, for `x` outside `D`.
    pub fn ray_hit(&self, x: &[f64], w: &[f64]) -> Option<f64> {
        let p = self.to_unit(x);
        let q = self.to_unit_dir(w);
        let a: f64 = q.iter().map(|v| v * v).sum();
        let b: f64 = p.iter().zip(&q).map(|(u, v)| u * v).sum();
        let c: f64 = p.iter().map(|v| v * v).sum::<f64>() - 1.0;
        if c <= 0.0 {
            return Some(0.0);
        }
        let disc = b * b - a * c;
        if disc < 0.0 || b >= 0.0 {
            return None;
        }
        // stable smaller root of a s^2 + 2 b s + c
        let s = c / (-b + disc.sqrt());
        Some(s)
    }

    pub fn min_curvature(&self) -> f64 {
        match self {
            Self::Ball { radius, .. } => 1.0 / radius,
            Self::Ellipse { semi_axes, .. } => {
                let (a, b) = *semi_axes;
                a.min(b) / (a.max(b) * a.max(b))
            }
        }
    }

    /// Radius of the largest ball about the center inside `D`.
    pub fn inradius(&self) -> f64 {
        match self {
            Self::Ball { radius, .. } => *radius,
            Self::Ellipse { semi_axes, .. } => semi_axes.0.min(semi_axes.1),
        }
    }

    /// Smallest `r` with `D ⊂ B_r(0)`.
    pub fn circumradius(&self) -> f64 {
        norm(&self.center())
            + match self {
                Self::Ball { radius, .. } => *radius,
                Self::Ellipse { semi_axes, .. } => semi_axes.0.max(semi_axes.1),
            }
    }

    /// Largest `ρ` with `B_ρ(0) ⊂ D`; non-positive when the origin is outside `D`.
    pub fn inner_radius_about_origin(&self) -> f64 {
        -self.signed_distance(&vec![0.0; self.dim()])
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Self::Ball { radius, .. } => 2.0 * radius,
            Self::Ellipse { semi_axes, .. } => 2.0 * semi_axes.0.max(semi_axes.1),
        }
    }

    /// `count` boundary points: uniform in angle (2-D) or a Fibonacci lattice (3-D).
    pub fn boundary_samples(&self, count: usize) -> Vec<BoundaryPoint> {
        match self {
            Self::Ball { center, radius } => sphere_directions(center.len(), count)
                .into_iter()
                .map(|d| BoundaryPoint {
                    point: d.iter().zip(center).map(|(u, c)| c + radius * u).collect(),
                    normal: d,
                    curvature: 1.0 / radius,
                })
                .collect(),
            Self::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let (a, b) = *semi_axes;
                let (s, c) = angle.sin_cos();
                (0..count)
                    .map(|k| {
                        let t = TAU * k as f64 / count as f64;
                        let (st, ct) = t.sin_cos();
                        let (u, v) = (a * ct, b * st);
                        // outward normal in the local frame: (b cos t, a sin t)
                        let (nu, nv) = (b * ct, a * st);
                        let len = (nu * nu + nv * nv).sqrt();
                        let curvature = a * b / (a * a * st * st + b * b * ct * ct).powf(1.5);
                        BoundaryPoint {
                            point: vec![center[0] + c * u - s * v, center[1] + s * u + c * v],
                            normal: vec![(c * nu - s * nv) / len, (s * nu + c * nv) / len],
                            curvature,
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Near-uniform unit vectors: equally spaced angles in 2-D, a Fibonacci lattice in 3-D.
pub fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        2 => (0..count)
            .map(|k| {
                let t = TAU * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![rho * t.cos(), rho * t.sin(), z]
                })
                .collect()
        }
    }
}

// Distance from (y0, y1), both >= 0, to the ellipse with semi-axes e0 >= e1,
// by bisection on the Lagrange parameter.
fn distance_to_ellipse(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1) * (e0 / e1);
            let n0 = r0 * z0;
            let mut s0 = z1 - 1.0;
            let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
            let mut s = 0.0;
            for _ in 0..200 {
                s = 0.5 * (s0 + s1);
                if s == s0 || s == s1 {
                    break;
                }
                let ratio0 = n0 / (s + r0);
                let ratio1 = z1 / (s + 1.0);
                let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
                if gs > 0.0 {
                    s0 = s;
                } else if gs < 0.0 {
                    s1 = s;
                } else {
                    break;
                }
            }
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            (x0 - y0).hypot(x1 - y1)
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
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}
