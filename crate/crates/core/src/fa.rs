//! Finite-ladder surrogate for the decay condition
//! `|x|^(beta + k) |D^k (f - 1)|` bounded, `k = 0..=3`.

use serde::{Deserialize, Serialize};

use crate::domain::sphere_directions;
use crate::error::{invalid, Error, Result};
use crate::rhs::{norm, RightHandSide};

/// Number of top rungs inspected for a growth trend.
pub const GROWTH_WINDOW: usize = 5;
/// A rung-to-rung ratio above this counts as growth.
pub const GROWTH_RATIO: f64 = 1.0 + 1e-3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaReport {
    pub beta: f64,
    pub radii: Vec<f64>,
    /// `suprema[k][j]`: sup over sphere `j` of `|x|^(beta+k) |D^k (f-1)|`.
    pub suprema: Vec<Vec<f64>>,
    /// Log-log slope of each suprema ladder over its top window.
    pub growth_exponents: Vec<f64>,
    pub pass_per_k: Vec<bool>,
    pub pass: bool,
}

/// The geometric ladder `2, 4, ..., 2^10`.
pub fn default_ladder() -> Vec<f64> {
    (1..=10).map(|k| 2f64.powi(k)).collect()
}

pub fn validate_fa(rhs: &RightHandSide, beta: f64, radii: &[f64], k_max: usize) -> Result<FaReport> {
    if k_max > 3 {
        return invalid(format!("k_max must be at most 3, got {k_max}"));
    }
    if radii.is_empty() || radii[0] < 2.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("radii must be increasing and start at 2 or above");
    }
    let n = rhs.dim();
    let dirs = sphere_directions(n, if n == 2 { 64 } else { 128 });
    let mut suprema = vec![Vec::with_capacity(radii.len()); k_max + 1];
    for &r in radii {
        let mut sup = vec![0.0f64; k_max + 1];
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|c| c * r).collect();
            let value = rhs.eval(&x);
            if !(value > 0.0) {
                return Err(Error::NonPositiveSource { point: x, value });
            }
            for (k, s) in sup.iter_mut().enumerate() {
                let dk = max_partial(rhs, &x, k)?;
                *s = s.max(r.powf(beta + k as f64) * dk);
            }
        }
        for k in 0..=k_max {
            suprema[k].push(sup[k]);
        }
    }
    let growth_exponents: Vec<f64> = suprema.iter().map(|s| top_slope(radii, s)).collect();
    let pass_per_k: Vec<bool> = suprema.iter().map(|s| !grows(s)).collect();
    let pass = pass_per_k.iter().all(|&p| p);
    Ok(FaReport {
        beta,
        radii: radii.to_vec(),
        suprema,
        growth_exponents,
        pass_per_k,
        pass,
    })
}

fn grows(s: &[f64]) -> bool {
    let start = s.len().saturating_sub(GROWTH_WINDOW);
    let top = &s[start..];
    top.len() >= 2 && top.windows(2).all(|w| w[1] > w[0] * GROWTH_RATIO)
}

fn top_slope(radii: &[f64], s: &[f64]) -> f64 {
    let start = s.len().saturating_sub(GROWTH_WINDOW);
    let pts: Vec<(f64, f64)> = radii[start..]
        .iter()
        .zip(&s[start..])
        .filter(|(_, &v)| v > 0.0)
        .map(|(&r, &v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / m, a.1 + p.1 / m));
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

// 1-D central stencils (offset, weight) for derivative orders 0..=3 at unit step.
const STENCILS: [&[(f64, f64)]; 4] = [
    &[(0.0, 1.0)],
    &[(-1.0, -0.5), (1.0, 0.5)],
    &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
    &[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)],
];

/// Largest `|∂^α (f - 1)|` over multi-indices with `|α| = k`, by tensor
/// products of central differences with step `1e-4 |x|`.
fn max_partial(rhs: &RightHandSide, x: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Ok(rhs.excess(x).abs());
    }
    let n = x.len();
    let h = 1e-4 * norm(x).max(1.0);
    let mut best = 0.0f64;
    for alpha in multi_indices(n, k) {
        let mut acc = 0.0;
        let mut y = x.to_vec();
        // iterate over the tensor-product stencil
        let stencils: Vec<&[(f64, f64)]> = alpha.iter().map(|&a| STENCILS[a]).collect();
        let mut idx = vec![0usize; n];
        loop {
            let mut w = 1.0;
            for i in 0..n {
                let (off, wt) = stencils[i][idx[i]];
                y[i] = x[i] + off * h;
                w *= wt;
            }
            acc += w * rhs.excess(&y);
            let mut i = 0;
            while i < n {
                idx[i] += 1;
                if idx[i] < stencils[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        let d = acc / h.powi(k as i32);
        if !d.is_finite() {
            return Err(Error::Derivative {
                point: x.to_vec(),
                reason: format!("non-finite order-{k} difference"),
            });
        }
        best = best.max(d.abs());
    }
    Ok(best)
}

fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; n];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for a in 0..=left {
            cur[i] = a;
            rec(i + 1, left - a, cur, out);
        }
    }
    rec(0, k, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_source_passes_with_zero_suprema() {
        let f = RightHandSide::one(2);
        let rep = validate_fa(&f, 3.0, &default_ladder(), 3).unwrap();
        assert!(rep.pass);
        assert!(rep.suprema.iter().flatten().all(|&s| s == 0.0));
    }

    #[test]
    fn inverse_cube_has_unit_k0_suprema() {
        let f = RightHandSide::radial_perturbation(3, 1.0, 3.0, (0.5, 1.0)).unwrap();
        let rep = validate_fa(&f, 3.0, &default_ladder(), 3).unwrap();
        assert!(rep.pass);
        for s in &rep.suprema[0] {
            assert!((s - 1.0).abs() < 1e-12, "{s}");
        }
        // D^k r^-3 scales exactly like r^-(3+k)
        for k in 1..=3 {
            let s = &rep.suprema[k];
            let spread = s.iter().fold(0.0f64, |m, v| m.max((v / s[9] - 1.0).abs()));
            assert!(spread < 1e-3, "k={k}: {s:?}");
        }
    }

    #[test]
    fn sharpness_fails_above_two() {
        let f = RightHandSide::sharpness(2).unwrap();
        let rep = validate_fa(&f, 2.5, &default_ladder(), 0).unwrap();
        assert!(!rep.pass);
        assert!((rep.growth_exponents[0] - 0.5).abs() < 1e-9);
        let rep = validate_fa(&f, 2.0, &default_ladder(), 3).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(3, 3).len(), 10);
        assert_eq!(multi_indices(2, 2).len(), 3);
    }

    #[test]
    fn rejects_bad_ladders() {
        let f = RightHandSide::one(2);
        assert!(validate_fa(&f, 3.0, &[1.0, 2.0], 0).is_err());
        assert!(validate_fa(&f, 3.0, &[4.0, 2.0], 0).is_err());
        assert!(validate_fa(&f, 3.0, &[2.0, 4.0], 4).is_err());
    }
}
