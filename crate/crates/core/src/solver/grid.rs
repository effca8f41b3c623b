use serde::{Deserialize, Serialize};

use crate::domain::InnerDomain;
use crate::error::{invalid, Result};

/// Stencil directions grouped into orthogonal frames.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stencil {
    /// Integer offsets, one per direction (only one of `±v` is stored).
    pub directions: Vec<[i32; 3]>,
    /// Euclidean length of each offset in grid units.
    pub lengths: Vec<f64>,
    /// Each frame lists `n` mutually orthogonal direction indices.
    pub frames: Vec<Vec<usize>>,
    /// Stencil width: largest offset component.
    pub width: usize,
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Stencil {
    /// Planar pairs `(v, v⊥)` over primitive `v = (p, q)` with `p > 0, q ≥ 0`,
    /// `max(|p|, |q|) ≤ width`, ordered by angle.
    pub fn planar(width: usize) -> Result<Self> {
        if width == 0 {
            return invalid("stencil width must be at least 1");
        }
        let w = width as i32;
        let mut base: Vec<(i32, i32)> = Vec::new();
        for p in 1..=w {
            for q in 0..=w {
                if gcd(p, q) == 1 {
                    base.push((p, q));
                }
            }
        }
        base.sort_by(|a, b| (a.1 as f64).atan2(a.0 as f64).total_cmp(&(b.1 as f64).atan2(b.0 as f64)));
        let mut directions = Vec::new();
        let mut frames = Vec::new();
        for (p, q) in base {
            let k = directions.len();
            directions.push([p, q, 0]);
            directions.push([-q, p, 0]);
            frames.push(vec![k, k + 1]);
        }
        Ok(Self::finish(directions, frames, width))
    }

    /// The coordinate frame plus the twelve frames `{d, e, d × e}` with `d` a
    /// space diagonal and `e` an orthogonal face diagonal.
    pub fn spatial() -> Self {
        let mut directions = vec![[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        let mut frames = vec![vec![0, 1, 2]];
        let diagonals = [[1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1]];
        let faces = [[1, -1, 0], [1, 0, -1], [0, 1, -1], [1, 1, 0], [1, 0, 1], [0, 1, 1]];
        let index = |v: [i32; 3], dirs: &mut Vec<[i32; 3]>| -> usize {
            let neg = [-v[0], -v[1], -v[2]];
            if let Some(k) = dirs.iter().position(|d| *d == v || *d == neg) {
                k
            } else {
                dirs.push(v);
                dirs.len() - 1
            }
        };
        for d in diagonals {
            for e in faces {
                if d[0] * e[0] + d[1] * e[1] + d[2] * e[2] != 0 {
                    continue;
                }
                let c = [
                    d[1] * e[2] - d[2] * e[1],
                    d[2] * e[0] - d[0] * e[2],
                    d[0] * e[1] - d[1] * e[0],
                ];
                let a = index(d, &mut directions);
                let b = index(e, &mut directions);
                let cc = index(c, &mut directions);
                frames.push(vec![a, b, cc]);
            }
        }
        Self::finish(directions, frames, 2)
    }

    fn finish(directions: Vec<[i32; 3]>, frames: Vec<Vec<usize>>, width: usize) -> Self {
        let lengths = directions
            .iter()
            .map(|d| ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt())
            .collect();
        Self {
            directions,
            lengths,
            frames,
            width,
        }
    }

    pub fn for_dim(n: usize, width: usize) -> Result<Self> {
        match n {
            2 => Self::planar(width),
            3 => Ok(Self::spatial()),
            _ => invalid(format!("stencils exist for n = 2, 3, not {n}")),
        }
    }
}

/// Where one arm of a second difference ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arm {
    /// A full step onto another unknown.
    Node(u32),
    /// A shortened step of length `dist` onto boundary point `index`.
    Boundary { index: u32, dist: f64 },
}

/// Which boundary a Dirichlet point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Inner,
    Outer,
}

/// Uniform Cartesian grid on `[-R, R]^n` restricted to `B_R \ D`.
#[derive(Clone, Debug)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub r_out: f64,
    pub domain: Option<InnerDomain>,
    pub stencil: Stencil,
    half: i64,
    side: i64,
    /// Box index to unknown id, or -1.
    index: Vec<i32>,
    /// Unknown id to box index.
    boxes: Vec<u32>,
    /// Unknown id to its slot in `arms`, or `u32::MAX` for nodes with full stencils.
    near: Vec<u32>,
    /// Per near node: `2 * directions` arms, plus then minus.
    arms: Vec<Arm>,
    boundary_points: Vec<([f64; 3], BoundaryKind)>,
    offsets: Vec<i64>,
}

impl Grid {
    pub fn new(n: usize, domain: Option<&InnerDomain>, r_out: f64, h: f64, width: usize) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return invalid(format!("grids exist for n = 2, 3, not {n}"));
        }
        if !(h > 0.0 && r_out > 0.0 && r_out / h <= 2048.0) {
            return invalid(format!("need 0 < h and R/h ≤ 2048, got h = {h}, R = {r_out}"));
        }
        if let Some(d) = domain {
            if d.dim() != n {
                return invalid("domain dimension does not match the grid");
            }
            if d.circumradius() >= r_out {
                return invalid("the hole must lie inside the truncation ball");
            }
        }
        let stencil = Stencil::for_dim(n, width)?;
        let half = (r_out / h).ceil() as i64;
        let side = 2 * half + 1;
        let total = side.pow(n as u32) as usize;
        let eps = 1e-6 * h;
        let mut index = vec![-1i32; total];
        let mut boxes = Vec::new();
        for b in 0..total {
            let x = Self::coords_of(b as i64, n, half, side, h);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if r >= r_out - eps {
                continue;
            }
            if let Some(d) = domain {
                if d.signed_distance(&x[..n]) <= eps {
                    continue;
                }
            }
            index[b] = boxes.len() as i32;
            boxes.push(b as u32);
        }
        let offsets: Vec<i64> = stencil
            .directions
            .iter()
            .map(|d| (0..n).map(|k| d[k] as i64 * side.pow(k as u32)).sum())
            .collect();
        let mut grid = Self {
            n,
            h,
            r_out,
            domain: domain.cloned(),
            stencil,
            half,
            side,
            index,
            boxes,
            near: Vec::new(),
            arms: Vec::new(),
            boundary_points: Vec::new(),
            offsets,
        };
        grid.build_arms();
        Ok(grid)
    }

    fn coords_of(b: i64, n: usize, half: i64, side: i64, h: f64) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut rest = b;
        for xk in x.iter_mut().take(n) {
            *xk = ((rest % side) - half) as f64 * h;
            rest /= side;
        }
        x
    }

    fn build_arms(&mut self) {
        let n = self.n;
        let max_len = self.stencil.lengths.iter().cloned().fold(0.0, f64::max) * self.h;
        let mut near = vec![u32::MAX; self.boxes.len()];
        let mut arms = Vec::new();
        let mut points = Vec::new();
        for id in 0..self.boxes.len() {
            let x = self.point(id);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let clear_outer = r + max_len < self.r_out - 2e-6 * self.h;
            let clear_inner = self
                .domain
                .as_ref()
                .is_none_or(|d| d.signed_distance(&x[..n]) > max_len + 2e-6 * self.h);
            if clear_outer && clear_inner {
                continue;
            }
            near[id] = (arms.len() / (2 * self.stencil.directions.len())) as u32;
            for k in 0..self.stencil.directions.len() {
                for sign in [1.0, -1.0] {
                    let dir = self.stencil.directions[k];
                    let w: Vec<f64> = (0..n).map(|j| sign * dir[j] as f64 * self.h).collect();
                    let mut s = 1.0f64;
                    let mut kind = None;
                    if let Some(d) = &self.domain {
                        if let Some(t) = d.ray_hit(&x[..n], &w) {
                            if t <= 1.0 {
                                s = t;
                                kind = Some(BoundaryKind::Inner);
                            }
                        }
                    }
                    let t = sphere_exit(&x[..n], &w, self.r_out);
                    if t <= 1.0 && t < s {
                        s = t;
                        kind = Some(BoundaryKind::Outer);
                    }
                    let arm = match kind {
                        None => {
                            let b = self.boxes[id] as i64 + sign as i64 * self.offsets[k];
                            let j = self.index[b as usize];
                            if j >= 0 {
                                Arm::Node(j as u32)
                            } else {
                                // excluded node sitting within 1e-6 h of a boundary
                                let mut p = [0.0; 3];
                                for j in 0..n {
                                    p[j] = x[j] + w[j];
                                }
                                let kind = if self.domain.as_ref().is_some_and(|d| d.signed_distance(&p[..n]) <= 1e-6 * self.h) {
                                    BoundaryKind::Inner
                                } else {
                                    BoundaryKind::Outer
                                };
                                points.push((p, kind));
                                Arm::Boundary {
                                    index: (points.len() - 1) as u32,
                                    dist: self.stencil.lengths[k] * self.h,
                                }
                            }
                        }
                        Some(kind) => {
                            let mut p = [0.0; 3];
                            for j in 0..n {
                                p[j] = x[j] + s * w[j];
                            }
                            points.push((p, kind));
                            Arm::Boundary {
                                index: (points.len() - 1) as u32,
                                dist: s * self.stencil.lengths[k] * self.h,
                            }
                        }
                    };
                    arms.push(arm);
                }
            }
        }
        self.near = near;
        self.arms = arms;
        self.boundary_points = points;
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Coordinates of unknown `id` (trailing entries zero when `n = 2`).
    pub fn point(&self, id: usize) -> [f64; 3] {
        Self::coords_of(self.boxes[id] as i64, self.n, self.half, self.side, self.h)
    }

    /// Unknown id of the node at integer position `ijk`, if it is an unknown.
    pub fn node_at(&self, ijk: &[i64]) -> Option<usize> {
        let mut b = 0i64;
        for (k, &i) in ijk.iter().enumerate().take(self.n) {
            if i.abs() > self.half {
                return None;
            }
            b += (i + self.half) * self.side.pow(k as u32);
        }
        let j = self.index[b as usize];
        (j >= 0).then_some(j as usize)
    }

    pub fn is_near_boundary(&self, id: usize) -> bool {
        self.near[id] != u32::MAX
    }

    /// The two arms of direction `k` at node `id`.
    #[inline]
    pub fn arms(&self, id: usize, k: usize) -> (Arm, Arm) {
        let slot = self.near[id];
        if slot == u32::MAX {
            let b = self.boxes[id] as i64;
            let plus = self.index[(b + self.offsets[k]) as usize] as u32;
            let minus = self.index[(b - self.offsets[k]) as usize] as u32;
            (Arm::Node(plus), Arm::Node(minus))
        } else {
            let base = slot as usize * 2 * self.stencil.directions.len() + 2 * k;
            (self.arms[base], self.arms[base + 1])
        }
    }

    pub fn boundary_points(&self) -> &[([f64; 3], BoundaryKind)] {
        &self.boundary_points
    }

    /// Dirichlet values at every boundary point.
    pub fn boundary_values<F: Fn(&[f64], BoundaryKind) -> f64>(&self, data: F) -> Vec<f64> {
        self.boundary_points
            .iter()
            .map(|(p, kind)| data(&p[..self.n], *kind))
            .collect()
    }

    /// Same node layout and stencil.
    pub fn same_layout(&self, other: &Grid) -> bool {
        self.n == other.n
            && self.h == other.h
            && self.r_out == other.r_out
            && self.domain == other.domain
            && self.stencil.width == other.stencil.width
            && self.boxes == other.boxes
    }
}

/// Parameter `s > 0` where `x + s w` leaves the ball `B_r`, for `x` inside it.
fn sphere_exit(x: &[f64], w: &[f64], r: f64) -> f64 {
    let a: f64 = w.iter().map(|v| v * v).sum();
    let b: f64 = x.iter().zip(w).map(|(p, q)| p * q).sum();
    let c: f64 = x.iter().map(|v| v * v).sum::<f64>() - r * r;
    let disc = (b * b - a * c).max(0.0).sqrt();
    if b <= 0.0 {
        (-b + disc) / a
    } else {
        -c / (b + disc)
    }
}
