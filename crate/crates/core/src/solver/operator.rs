use crate::solver::grid::{Arm, Grid};

/// A directional second difference with the data needed to differentiate it.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SecondDiff {
    pub delta: f64,
    pub plus: Arm,
    pub minus: Arm,
    /// Arm lengths.
    pub a: f64,
    pub b: f64,
}

#[inline]
fn arm_value(arm: Arm, values: &[f64], boundary: &[f64]) -> (f64, Option<f64>) {
    match arm {
        Arm::Node(j) => (values[j as usize], None),
        Arm::Boundary { index, dist } => (boundary[index as usize], Some(dist)),
    }
}

/// Second derivative along direction `k` at node `id`, with arms shortened at boundaries:
/// `2/(a+b) [(u⁺ - u₀)/a + (u⁻ - u₀)/b]`.
#[inline]
pub(crate) fn second_difference(grid: &Grid, values: &[f64], boundary: &[f64], id: usize, k: usize) -> SecondDiff {
    let (plus, minus) = grid.arms(id, k);
    let full = grid.stencil.lengths[k] * grid.h;
    let u0 = values[id];
    let (up, da) = arm_value(plus, values, boundary);
    let (um, db) = arm_value(minus, values, boundary);
    let (a, b) = (da.unwrap_or(full), db.unwrap_or(full));
    let delta = if da.is_none() && db.is_none() {
        (up + um - 2.0 * u0) / (full * full)
    } else {
        2.0 / (a + b) * ((up - u0) / a + (um - u0) / b)
    };
    SecondDiff {
        delta,
        plus,
        minus,
        a,
        b,
    }
}

#[inline]
fn frame_value(d: &[f64]) -> f64 {
    let mut prod = 1.0;
    let mut neg = 0.0;
    for &x in d {
        prod *= x.max(0.0);
        neg += x.min(0.0);
    }
    prod + neg
}

/// Frame minimizing `Π max(Δ, 0) + Σ min(Δ, 0)`; the lowest index wins ties.
pub(crate) fn active_frame(grid: &Grid, values: &[f64], boundary: &[f64], id: usize) -> (f64, usize, [SecondDiff; 3]) {
    let n = grid.n;
    let mut best = f64::INFINITY;
    let mut best_frame = 0;
    let empty = SecondDiff {
        delta: 0.0,
        plus: Arm::Node(0),
        minus: Arm::Node(0),
        a: 1.0,
        b: 1.0,
    };
    let mut best_diffs = [empty; 3];
    for (f, frame) in grid.stencil.frames.iter().enumerate() {
        let mut diffs = [empty; 3];
        let mut deltas = [0.0; 3];
        for (j, &k) in frame.iter().enumerate() {
            diffs[j] = second_difference(grid, values, boundary, id, k);
            deltas[j] = diffs[j].delta;
        }
        let v = frame_value(&deltas[..n]);
        if v < best {
            best = v;
            best_frame = f;
            best_diffs = diffs;
        }
    }
    (best, best_frame, best_diffs)
}

/// The monotone wide-stencil Monge-Ampère operator at node `id`.
pub fn ma_operator(values: &[f64], grid: &Grid, boundary: &[f64], id: usize) -> f64 {
    let n = grid.n;
    let mut best = f64::INFINITY;
    let mut deltas = [0.0; 3];
    for frame in &grid.stencil.frames {
        for (j, &k) in frame.iter().enumerate() {
            deltas[j] = second_difference(grid, values, boundary, id, k).delta;
        }
        best = best.min(frame_value(&deltas[..n]));
    }
    best
}

/// The operator together with a bound on `|∂/∂u₀|` that stays valid while
/// `u₀` increases: over frames, `Σ_k 2/(a_k b_k) max(Π_{j≠k} Δ_j⁺, 1)`.
pub(crate) fn operator_with_slope(grid: &Grid, values: &[f64], boundary: &[f64], id: usize) -> (f64, f64) {
    let n = grid.n;
    let mut best = f64::INFINITY;
    let mut slope = 0.0f64;
    let mut diffs = [(0.0, 0.0); 3];
    for frame in &grid.stencil.frames {
        let mut deltas = [0.0; 3];
        for (j, &k) in frame.iter().enumerate() {
            let sd = second_difference(grid, values, boundary, id, k);
            deltas[j] = sd.delta;
            diffs[j] = (sd.delta, 2.0 / (sd.a * sd.b));
        }
        best = best.min(frame_value(&deltas[..n]));
        let mut frame_slope = 0.0;
        for k in 0..n {
            let others: f64 = (0..n).filter(|&j| j != k).map(|j| diffs[j].0.max(0.0)).product();
            frame_slope += diffs[k].1 * others.max(1.0);
        }
        slope = slope.max(frame_slope);
    }
    (best, slope)
}

/// Smallest second difference over all directions at node `id`.
pub fn min_second_difference(values: &[f64], grid: &Grid, boundary: &[f64], id: usize) -> f64 {
    (0..grid.stencil.directions.len())
        .map(|k| second_difference(grid, values, boundary, id, k).delta)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::InnerDomain;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn sample<F: Fn(&[f64]) -> f64>(g: &Grid, u: F) -> (Vec<f64>, Vec<f64>) {
        let values = (0..g.len()).map(|i| u(&g.point(i)[..g.n])).collect();
        let boundary = g.boundary_values(|p, _| u(p));
        (values, boundary)
    }

    #[test]
    fn paraboloid_gives_one_everywhere() {
        let d = InnerDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let g = Grid::new(2, Some(&d), 4.0, 0.25, 3).unwrap();
        let (v, b) = sample(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        for i in 0..g.len() {
            assert!((ma_operator(&v, &g, &b, i) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_quadratic_gives_zero() {
        let g = Grid::new(2, None, 2.0, 0.25, 2).unwrap();
        let (v, b) = sample(&g, |x| 0.5 * x[0] * x[0]);
        for i in 0..g.len() {
            assert!(ma_operator(&v, &g, &b, i).abs() < 1e-10);
        }
    }

    #[test]
    fn aligned_quadratics_are_exact() {
        // eigenvectors along stencil directions, det 1
        for (dir, lam) in [((1.0, 0.0), 2.0), ((1.0, 1.0), 3.0), ((2.0, 1.0), 0.5), ((3.0, 1.0), 4.0)] {
            let (c, s) = {
                let l: f64 = ((dir.0 * dir.0 + dir.1 * dir.1) as f64).sqrt();
                (dir.0 / l, dir.1 / l)
            };
            let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
            let a = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![lam, 1.0 / lam])) * q.transpose();
            let g = Grid::new(2, None, 3.0, 0.25, 3).unwrap();
            let (v, b) = sample(&g, |x| 0.5 * (a[(0, 0)] * x[0] * x[0] + 2.0 * a[(0, 1)] * x[0] * x[1] + a[(1, 1)] * x[1] * x[1]));
            for i in 0..g.len() {
                assert!((ma_operator(&v, &g, &b, i) - 1.0).abs() < 1e-10, "{dir:?}");
            }
        }
    }

    #[test]
    fn misaligned_error_shrinks_with_width() {
        let angle: f64 = 0.3;
        let (c, s) = (angle.cos(), angle.sin());
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let a = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0 / 3.0])) * q.transpose();
        assert!((SymmetricEigen::new(a.clone()).eigenvalues.product() - 1.0).abs() < 1e-12);
        let mut errors = Vec::new();
        for w in [1, 2, 4, 8] {
            let g = Grid::new(2, None, 1.0, 0.0625, w).unwrap();
            let (v, b) = sample(&g, |x| 0.5 * (a[(0, 0)] * x[0] * x[0] + 2.0 * a[(0, 1)] * x[0] * x[1] + a[(1, 1)] * x[1] * x[1]));
            let centre = g.node_at(&[0, 0]).unwrap();
            errors.push((ma_operator(&v, &g, &b, centre) - 1.0).abs());
        }
        assert!(errors.windows(2).all(|e| e[1] <= e[0]), "{errors:?}");
        assert!(errors[3] < 0.05 * errors[0]);
    }

    #[test]
    fn spatial_paraboloid_and_degenerate_cases() {
        let g = Grid::new(3, None, 1.0, 0.25, 2).unwrap();
        let (v, b) = sample(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
        for i in 0..g.len() {
            assert!((ma_operator(&v, &g, &b, i) - 1.0).abs() < 1e-10);
        }
        let (v, b) = sample(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        for i in 0..g.len() {
            assert!(ma_operator(&v, &g, &b, i).abs() < 1e-10);
        }
    }

    #[test]
    fn operator_is_monotone_in_neighbours() {
        let d = InnerDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let g = Grid::new(2, Some(&d), 3.0, 0.25, 2).unwrap();
        let (mut v, b) = sample(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.1 * x[0] * x[1] * x[1]);
        let id = g.node_at(&[6, 1]).unwrap();
        let before = ma_operator(&v, &g, &b, id);
        let orig = v.clone();
        for j in 0..g.len() {
            if j != id {
                v[j] += 0.01;
            }
        }
        assert!(ma_operator(&v, &g, &b, id) >= before);
        let mut v = orig;
        v[id] += 0.05;
        assert!(ma_operator(&v, &g, &b, id) <= before);
    }
}
