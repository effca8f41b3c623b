use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{graded_panels, integrate_radial, GL16};
use crate::rhs::RadialFunction;

/// `det D^2 h` for a radial `h(r)`: `h'' (h'/r)^(n-1)`.
pub fn radial_det(u_prime: f64, u_second: f64, r: f64, n: usize) -> Result<f64> {
    if !(r > 0.0) {
        return invalid(format!("radial_det needs r > 0, got {r}"));
    }
    Ok(u_second * (u_prime / r).powi(n as i32 - 1))
}

/// Parameters of a radial solution
/// `u(r) = base_value + ∫_{base_radius}^r (∫_anchor^s n t^(n-1) f dt + d)^(1/n) ds`,
/// tabulated on `[start, r_max]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct RadialSetup {
    pub n: usize,
    pub d: f64,
    /// Lower limit of the inner integral: 1 for exterior profiles, 0 for global ones.
    pub anchor: f64,
    pub start: f64,
    pub base_radius: f64,
    pub base_value: f64,
    pub r_max: f64,
}

impl RadialSetup {
    /// Exterior profile starting (and normalized) at `r0`.
    pub fn exterior(n: usize, d: f64, r0: f64, base: f64) -> Self {
        Self {
            n,
            d,
            anchor: 1.0,
            start: r0,
            base_radius: r0,
            base_value: base,
            r_max: 1e4 * r0.max(1.0),
        }
    }

    /// `u(r) = n^(1/n) ∫_0^r (∫_0^s t^(n-1) f dt)^(1/n) ds`.
    pub fn global(n: usize) -> Self {
        Self {
            n,
            d: 0.0,
            anchor: 0.0,
            start: 0.0,
            base_radius: 0.0,
            base_value: 0.0,
            r_max: 1e4,
        }
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = r_max;
        self
    }
}

/// Least-squares model `w(r) ≈ constant + log_coefficient log r + residual_coefficient r^-residual_exponent`
/// of `w = u - r²/2` over the last decade of the grid, used past `r_max`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TailModel {
    pub quadratic_coefficient: f64,
    pub log_coefficient: f64,
    pub constant: f64,
    pub residual_coefficient: f64,
    pub residual_exponent: f64,
}

impl TailModel {
    fn eval(&self, r: f64) -> f64 {
        self.constant + self.log_coefficient * r.ln() + self.residual_coefficient * r.powf(-self.residual_exponent)
    }
}

/// A radial solution of `det D^2 u = f` tabulated on an adaptive grid.
///
/// Internally the profile tracks `J(s) = I(s) + d - s^n` and
/// `E(r) = ∫_start^r (u'(s) - s) ds`, so `u - r²/2` is available without
/// cancellation at large radii.
#[derive(Clone)]
pub struct RadialProfile {
    setup: RadialSetup,
    f: Arc<dyn RadialFunction>,
    nodes: Vec<f64>,
    j: Vec<f64>,
    e: Vec<f64>,
    offset: f64,
    tail: TailModel,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("setup", &self.setup)
            .field("nodes", &self.nodes.len())
            .field("tail", &self.tail)
            .finish()
    }
}

/// `u'(s) - s = s ((1 + J/s^n)^(1/n) - 1)`, computed stably.
#[inline]
fn slope_excess(s: f64, j: f64, n: usize) -> f64 {
    if s == 0.0 {
        return j.max(0.0).powf(1.0 / n as f64);
    }
    let ratio = j / s.powi(n as i32);
    if ratio <= -1.0 {
        -s
    } else {
        s * (ratio.ln_1p() / n as f64).exp_m1()
    }
}

struct Kernel<'a> {
    f: &'a dyn RadialFunction,
    n: usize,
}

impl Kernel<'_> {
    #[inline]
    fn source(&self, t: f64) -> f64 {
        self.n as f64 * t.powi(self.n as i32 - 1) * self.f.excess(t)
    }

    /// `∫_a^b n t^(n-1) (f - 1) dt` on one panel.
    fn g_int(&self, a: f64, b: f64) -> f64 {
        let (x, w) = &*GL16;
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * x.iter().zip(w).map(|(xi, wi)| wi * self.source(m + h * xi)).sum::<f64>()
    }

    /// `∫_a^b (u' - s) ds` on one panel given `J(a)`.
    fn e_int(&self, a: f64, b: f64, j_a: f64) -> f64 {
        let (x, w) = &*GL16;
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * x
            .iter()
            .zip(w)
            .map(|(xi, wi)| {
                let s = m + h * xi;
                wi * slope_excess(s, j_a + self.g_int(a, s), self.n)
            })
            .sum::<f64>()
    }

    fn panel(&self, a: f64, b: f64, j_a: f64) -> (f64, f64) {
        (self.g_int(a, b), self.e_int(a, b, j_a))
    }

    /// Accepted sub-panels of `[a, b]` as `(right end, ΔG, ΔE)`.
    fn adapt(&self, a: f64, b: f64, j_a: f64, whole: (f64, f64), depth: usize, out: &mut Vec<(f64, f64, f64)>) {
        let mid = 0.5 * (a + b);
        let left = self.panel(a, mid, j_a);
        let right = self.panel(mid, b, j_a + left.0);
        let (dg, de) = (left.0 + right.0, left.1 + right.1);
        let tol_g = 1e-14 * (1.0 + j_a.abs() + dg.abs());
        let tol_e = 1e-14 * (1.0 + de.abs());
        let thin = (b - a) <= 1e-12 * b.max(1.0);
        if ((dg - whole.0).abs() <= tol_g && (de - whole.1).abs() <= tol_e) || thin || depth >= 60 {
            out.push((mid, left.0, left.1));
            out.push((b, right.0, right.1));
            return;
        }
        self.adapt(a, mid, j_a, left, depth + 1, out);
        let j_mid = j_a + out.iter().rev().take_while(|p| p.0 > a).map(|p| p.1).sum::<f64>();
        self.adapt(mid, b, j_mid, right, depth + 1, out);
    }
}

impl RadialProfile {
    /// The exterior solution `base + ∫_{r0}^r (∫_1^s n t^(n-1) f dt + d)^(1/n) ds`,
    /// or the global one when `r0 = 0`.
    pub fn exact(f: Arc<dyn RadialFunction>, n: usize, d: f64, r0: f64, base: f64) -> Result<Self> {
        let setup = if r0 == 0.0 {
            RadialSetup {
                d,
                base_value: base,
                ..RadialSetup::global(n)
            }
        } else {
            if r0 < 1.0 {
                return invalid(format!("exterior profiles need r0 >= 1, got {r0}"));
            }
            RadialSetup::exterior(n, d, r0, base)
        };
        Self::build(f, setup)
    }

    pub fn build(f: Arc<dyn RadialFunction>, setup: RadialSetup) -> Result<Self> {
        let n = setup.n;
        if !(n == 2 || n == 3) {
            return Err(Error::UnsupportedDimension(n, "radial profiles need n in {2, 3}".into()));
        }
        if !(setup.start >= 0.0 && setup.r_max > setup.start) {
            return invalid(format!("need 0 <= start < r_max, got {setup:?}"));
        }
        if setup.base_radius < setup.start || setup.base_radius > setup.r_max {
            return invalid("base radius must lie in [start, r_max]");
        }
        let kernel = Kernel { f: f.as_ref(), n };
        let breaks = f.breakpoints();
        let src = |t: f64| kernel.source(t);
        let (lo, hi) = if setup.start < setup.anchor {
            (setup.start, setup.anchor)
        } else {
            (setup.anchor, setup.start)
        };
        let mut g_start = integrate_radial(&src, lo, hi, &breaks, 1e-15);
        if setup.start < setup.anchor {
            g_start = -g_start;
        }
        let j_start = setup.d - setup.anchor.powi(n as i32) + g_start;
        let inner = setup.start.powi(n as i32) + j_start;
        let scale = 1.0 + setup.start.powi(n as i32);
        if inner < -1e-13 * scale || !inner.is_finite() {
            return Err(Error::DegenerateShooting {
                s: setup.start,
                value: inner,
            });
        }

        let mut knots = breaks.clone();
        knots.push(setup.base_radius);
        knots.push(setup.anchor);
        let panels = graded_panels(setup.start, setup.r_max, &knots, 1.05);
        let mut nodes = vec![setup.start];
        let mut j = vec![j_start];
        let mut e = vec![0.0];
        let mut buf = Vec::new();
        for w in panels.windows(2) {
            let (a, b) = (w[0], w[1]);
            let j_a = *j.last().unwrap();
            let whole = kernel.panel(a, b, j_a);
            buf.clear();
            kernel.adapt(a, b, j_a, whole, 0, &mut buf);
            for &(r, dg, de) in &buf {
                let jl = *j.last().unwrap();
                let el = *e.last().unwrap();
                nodes.push(r);
                j.push(jl + dg);
                e.push(el + de);
            }
        }
        let mut profile = Self {
            setup,
            f,
            nodes,
            j,
            e,
            offset: 0.0,
            tail: TailModel {
                quadratic_coefficient: 0.5,
                log_coefficient: 0.0,
                constant: 0.0,
                residual_coefficient: 0.0,
                residual_exponent: 1.0,
            },
        };
        let e_base = profile.excess_integral(setup.base_radius);
        profile.offset = setup.base_value - 0.5 * setup.base_radius * setup.base_radius - e_base;
        profile.tail = profile.fit_tail();
        Ok(profile)
    }

    fn fit_tail(&self) -> TailModel {
        let n = self.setup.n;
        let r_max = self.setup.r_max;
        let p = self.f.tail().exponent;
        let p = if self.f.tail().amplitude == 0.0 { f64::INFINITY } else { p };
        let e = if n >= 3 { p.min(n as f64) - 2.0 } else { (p - 2.0).min(2.0) };
        let e = e.clamp(0.1, 4.0);
        let pts: Vec<usize> = (0..self.nodes.len()).filter(|&i| self.nodes[i] >= r_max / 10.0).collect();
        let mut model = TailModel {
            quadratic_coefficient: 0.5,
            log_coefficient: 0.0,
            constant: self.offset + self.e.last().copied().unwrap_or(0.0),
            residual_coefficient: 0.0,
            residual_exponent: e,
        };
        if pts.len() < 4 {
            return model;
        }
        let a = DMatrix::from_fn(pts.len(), 3, |row, col| {
            let r = self.nodes[pts[row]];
            match col {
                0 => 1.0,
                1 => r.ln(),
                _ => r.powf(-e),
            }
        });
        let y = DVector::from_iterator(pts.len(), pts.iter().map(|&i| self.offset + self.e[i]));
        if let Ok(sol) = a.svd(true, true).solve(&y, 1e-14) {
            model.constant = sol[0];
            model.log_coefficient = sol[1];
            model.residual_coefficient = sol[2];
        }
        model
    }

    pub fn setup(&self) -> &RadialSetup {
        &self.setup
    }

    pub fn n(&self) -> usize {
        self.setup.n
    }

    pub fn d(&self) -> f64 {
        self.setup.d
    }

    pub fn source(&self) -> &Arc<dyn RadialFunction> {
        &self.f
    }

    pub fn grid(&self) -> &[f64] {
        &self.nodes
    }

    pub fn tail_model(&self) -> &TailModel {
        &self.tail
    }

    pub fn r_max(&self) -> f64 {
        self.setup.r_max
    }

    pub fn start(&self) -> f64 {
        self.setup.start
    }

    /// `J(r_max)`, the inner integral plus `d` minus `r_max^n`.
    pub fn j_at_end(&self) -> f64 {
        *self.j.last().unwrap()
    }

    /// `u(r_max) - r_max²/2`.
    pub fn w_at_end(&self) -> f64 {
        self.offset + self.e.last().unwrap()
    }

    fn locate(&self, r: f64) -> usize {
        let k = self.nodes.partition_point(|&x| x <= r);
        k.saturating_sub(1).min(self.nodes.len() - 2)
    }

    fn kernel(&self) -> Kernel<'_> {
        Kernel {
            f: self.f.as_ref(),
            n: self.setup.n,
        }
    }

    /// `J(r)`, the inner integral plus `d` minus `r^n`.
    pub fn j(&self, r: f64) -> f64 {
        let k = self.locate(r);
        self.j[k] + self.kernel().g_int(self.nodes[k], r)
    }

    fn excess_integral(&self, r: f64) -> f64 {
        let k = self.locate(r);
        self.e[k] + self.kernel().e_int(self.nodes[k], r, self.j[k])
    }

    /// `u(r) - r²/2`, using the fitted tail model beyond `r_max`. NaN below `start`.
    pub fn w(&self, r: f64) -> f64 {
        if r < self.setup.start {
            return f64::NAN;
        }
        if r > self.setup.r_max {
            let shift = self.w_at_end() - self.tail.eval(self.setup.r_max);
            return self.tail.eval(r) + shift;
        }
        self.offset + self.excess_integral(r)
    }

    pub fn u(&self, r: f64) -> f64 {
        0.5 * r * r + self.w(r)
    }

    pub fn u_prime(&self, r: f64) -> f64 {
        if r > self.setup.r_max {
            // derivative of the tail model
            let t = &self.tail;
            return r + t.log_coefficient / r - t.residual_exponent * t.residual_coefficient * r.powf(-t.residual_exponent - 1.0);
        }
        r + slope_excess(r, self.j(r), self.setup.n)
    }

    /// `u'' = r^(n-1) f(r) / u'^(n-1)` from differentiating the closed form.
    pub fn u_second(&self, r: f64) -> f64 {
        let n = self.setup.n as i32;
        let up = self.u_prime(r);
        r.powi(n - 1) * self.f.value(r) / up.powi(n - 1)
    }

    /// `u'` at the stored nodes, without re-integration.
    pub fn node_slopes(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.j)
            .map(|(&r, &j)| r + slope_excess(r, j, self.setup.n))
            .collect()
    }

    /// `u` at the stored nodes.
    pub fn node_values(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.e)
            .map(|(&r, &e)| 0.5 * r * r + self.offset + e)
            .collect()
    }

    /// Largest `|u''(u'/r)^(n-1) - f| / (1 + |f|)` over interior nodes.
    pub fn det_residual(&self) -> f64 {
        let n = self.setup.n;
        let slopes = self.node_slopes();
        let last = self.nodes.len() - 1;
        (1..last)
            .filter(|&i| self.nodes[i] > 0.0 && slopes[i] > 0.0)
            .map(|i| {
                let r = self.nodes[i];
                let f = self.f.value(r);
                let up = slopes[i];
                let us = r.powi(n as i32 - 1) * f / up.powi(n as i32 - 1);
                (radial_det(up, us, r, n).unwrap() - f).abs() / (1.0 + f.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Writes `(r, u, u_prime, f)` rows to `csv_path` and the tail model and
    /// parameters to `json_path`.
    pub fn export(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(["r", "u", "u_prime", "f"])?;
        for ((r, u), up) in self.nodes.iter().zip(self.node_values()).zip(self.node_slopes()) {
            w.write_record(&[r.to_string(), u.to_string(), up.to_string(), self.f.value(*r).to_string()])?;
        }
        w.flush()?;
        let sidecar = ProfileSidecar {
            setup: self.setup,
            tail: self.tail,
            nodes: self.nodes.len(),
        };
        std::fs::write(json_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    /// Uniform cubic-Hermite table of `u` on `[a, b]` for fast repeated evaluation.
    pub fn tabulate(&self, a: f64, b: f64, spacing: f64) -> RadialTable {
        let a = a.max(self.setup.start);
        let b = b.min(self.setup.r_max).max(a + spacing);
        let count = ((b - a) / spacing).ceil() as usize + 1;
        let h = (b - a) / (count - 1) as f64;
        let r: Vec<f64> = (0..count).map(|i| a + h * i as f64).collect();
        RadialTable {
            a,
            h,
            w: r.iter().map(|&x| self.w(x)).collect(),
            up: r.iter().map(|&x| self.u_prime(x) - x).collect(),
            profile: self.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileSidecar {
    setup: RadialSetup,
    tail: TailModel,
    nodes: usize,
}

/// Cubic-Hermite interpolant of `u - r²/2` on a uniform grid, falling back to
/// the exact profile outside its range.
#[derive(Clone, Debug)]
pub struct RadialTable {
    a: f64,
    h: f64,
    w: Vec<f64>,
    up: Vec<f64>,
    profile: RadialProfile,
}

impl RadialTable {
    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn u(&self, r: f64) -> f64 {
        let t = (r - self.a) / self.h;
        if !(t >= 0.0) || t >= (self.w.len() - 1) as f64 {
            return self.profile.u(r);
        }
        let i = t as usize;
        let s = t - i as f64;
        let (p0, p1) = (self.w[i], self.w[i + 1]);
        let (m0, m1) = (self.up[i] * self.h, self.up[i + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        0.5 * r * r
            + (2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * p1
            + (s3 - s2) * m1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rhs::{ConstantRadial, RightHandSide};

    fn one() -> Arc<dyn RadialFunction> {
        Arc::new(ConstantRadial(1.0))
    }

    #[test]
    fn det_of_paraboloid_is_one() {
        for n in [2, 3] {
            for r in [0.5, 1.0, 7.0] {
                assert_eq!(radial_det(r, 1.0, r, n).unwrap(), 1.0);
            }
        }
        assert!(radial_det(1.0, 1.0, 0.0, 2).is_err());
    }

    #[test]
    fn det_of_log_corrected_paraboloid() {
        // H = r²/2 + log r, d = 1, at r = sqrt 2
        let r = 2f64.sqrt();
        let det = radial_det(r + 1.0 / r, 1.0 - 1.0 / (r * r), r, 2).unwrap();
        assert!((det - 0.75).abs() < 1e-15);
    }

    #[test]
    fn det_of_cube_root_profile_matches_symbolic_derivative() {
        // u' = (r^3 + 3r)^(1/3) => u'' = (3r^2 + 3) / (3 (r^3 + 3r)^(2/3)),
        // det = u'' (u'/r)^2 = (r^2 + 1) / r^2 = f(r) with f = 1 + r^-2
        let r = 10.0f64;
        let up = (r.powi(3) + 3.0 * r).cbrt();
        let us = (3.0 * r * r + 3.0) / (3.0 * (r.powi(3) + 3.0 * r).powf(2.0 / 3.0));
        let det = radial_det(up, us, r, 3).unwrap();
        assert!((det - (1.0 + 1e-2)).abs() < 1e-10);
    }

    #[test]
    fn telescoping_profile_is_exact_paraboloid() {
        for n in [2, 3] {
            let p = RadialProfile::exact(one(), n, 1.0, 2.0, 0.0).unwrap();
            for r in [2.0, 2.5, 10.0, 333.0, 9999.0] {
                let want = 0.5 * (r * r - 4.0);
                assert!((p.u(r) - want).abs() <= 1e-10 * want.abs().max(1.0), "n={n} r={r}");
                assert!((p.u_prime(r) - r).abs() < 1e-12 * r);
            }
        }
    }

    #[test]
    fn degenerate_start_is_allowed_at_zero_and_rejected_below() {
        let p = RadialProfile::exact(one(), 3, 0.0, 1.0, 0.0).unwrap();
        assert!(p.u_prime(1.0).abs() < 1e-12);
        // u - r²/2 converges to a negative constant
        let (a, b) = (p.w(1e3), p.w(1e4));
        assert!(a < 0.0 && (a - b).abs() < 1e-3);
        let g = RadialProfile::build(
            one(),
            RadialSetup {
                start: 1.5,
                ..RadialSetup::exterior(3, -5.0, 1.5, 0.0)
            },
        );
        assert!(matches!(g, Err(Error::DegenerateShooting { .. })));
    }

    #[test]
    fn profile_matches_brute_force_integration() {
        let f: Arc<dyn RadialFunction> =
            Arc::new(RightHandSide::radial_perturbation(3, 1.0, 4.0, (1.0, 2.0)).unwrap().to_radial().unwrap());
        let p = RadialProfile::exact(f.clone(), 3, 2.0, 1.0, 0.5).unwrap();
        // independent midpoint-rule oracle on a fine uniform grid
        let m = 400_000;
        let (a, b) = (1.0, 5.0);
        let h = (b - a) / m as f64;
        let mut inner = 2.0; // I(1) + d
        let mut u = 0.5;
        for i in 0..m {
            let s = a + (i as f64 + 0.5) * h;
            let inner_mid = inner + 0.5 * h * 3.0 * s * s * f.value(s);
            u += h * inner_mid.cbrt();
            inner += h * 3.0 * s * s * f.value(s);
        }
        assert!((p.u(b) - u).abs() < 1e-8, "{} vs {u}", p.u(b));
        assert!(p.det_residual() < 1e-12);
    }

    #[test]
    fn slopes_increase_and_values_are_convex() {
        let f: Arc<dyn RadialFunction> = Arc::new(RightHandSide::sharpness(2).unwrap().to_radial().unwrap());
        let p = RadialProfile::build(f, RadialSetup::global(2).with_r_max(100.0)).unwrap();
        let s = p.node_slopes();
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        let u = p.node_values();
        let r = p.grid();
        for i in 1..r.len() - 1 {
            let left = (u[i] - u[i - 1]) / (r[i] - r[i - 1]);
            let right = (u[i + 1] - u[i]) / (r[i + 1] - r[i]);
            assert!(right - left >= -1e-10);
        }
    }

    #[test]
    fn table_agrees_with_exact_evaluation() {
        let f: Arc<dyn RadialFunction> =
            Arc::new(RightHandSide::compact_bump(2, 1.0, vec![0.0, 0.0], 2.0).unwrap().to_radial().unwrap());
        let p = RadialProfile::build(f, RadialSetup::global(2).with_r_max(50.0)).unwrap();
        let t = p.tabulate(0.0, 20.0, 0.01);
        for k in 0..200 {
            let r = 0.037 + k as f64 * 0.1;
            assert!((t.u(r) - p.u(r)).abs() < 1e-9, "r={r}");
        }
    }

    #[test]
    fn export_writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = RadialProfile::exact(one(), 2, 1.0, 1.0, 0.0).unwrap();
        p.export(&dir.path().join("p.csv"), &dir.path().join("p.json")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
        assert!(text.starts_with("r,u,u_prime,f"));
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
        assert_eq!(side["setup"]["d"], 1.0);
    }
}
