use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate_radial;
use crate::radial::profile::{RadialProfile, RadialSetup};
use crate::rhs::{PowerTail, RadialFunction};

/// Ratio between the quadrature cutoff and the base radius in improper integrals.
pub const SPLIT_FACTOR: f64 = 1e3;

/// `∫_S^∞ (u'(s) - s) ds` from the large-`s` expansion of
/// `(s^n + J(s))^(1/n) - s`, given `J(S)` and the power tail of `f - 1`.
fn analytic_tail(n: usize, s: f64, j_s: f64, tail: &PowerTail) -> Result<f64> {
    let nf = n as f64;
    let mut total = j_s * s.powf(2.0 - nf) / (nf * (nf - 2.0))
        - (nf - 1.0) * j_s * j_s * s.powf(2.0 - 2.0 * nf) / (2.0 * nf * nf * (2.0 * nf - 2.0));
    if tail.amplitude != 0.0 {
        let p = tail.exponent;
        if !(p > 2.0) {
            return Err(Error::Divergent(format!(
                "f - 1 decays like r^-{p}, which is not integrable against s^(1-n) ds"
            )));
        }
        total += tail.amplitude * s.powf(2.0 - p) / ((p - 2.0) * (nf - 2.0));
    }
    Ok(total)
}

/// `lim_{r→∞} (u(r) - r²/2)` for the exterior profile with `u(base_radius) = base_value`
/// and inner integral anchored at 1.
pub fn far_field_constant(
    f: Arc<dyn RadialFunction>,
    n: usize,
    d: f64,
    base_radius: f64,
    base_value: f64,
) -> Result<f64> {
    if n < 3 {
        return Err(Error::UnsupportedDimension(
            n,
            "the constant term diverges in two dimensions; use log_coefficient".into(),
        ));
    }
    if !(base_radius > 0.0) {
        return invalid(format!("base radius must be positive, got {base_radius}"));
    }
    let tail = f.tail();
    let split = (SPLIT_FACTOR * base_radius.max(1.0)).max(tail.from);
    let setup = RadialSetup {
        n,
        d,
        anchor: 1.0,
        start: base_radius,
        base_radius,
        base_value,
        r_max: split,
    };
    let profile = RadialProfile::build(f, setup)?;
    Ok(profile.w_at_end() + analytic_tail(n, split, profile.j_at_end(), &tail)?)
}

/// Far-field constant of the lower family: base radius `rbar`, base value `beta1`.
pub fn mu1(f_upper: Arc<dyn RadialFunction>, n: usize, d: f64, rbar: f64, beta1: f64) -> Result<f64> {
    far_field_constant(f_upper, n, d, rbar, beta1)
}

/// Far-field constant of the upper family: base radius 2, base value `beta2`.
pub fn mu2(f_lower: Arc<dyn RadialFunction>, n: usize, d: f64, beta2: f64) -> Result<f64> {
    far_field_constant(f_lower, n, d, 2.0, beta2)
}

/// Finds `d ≥ d_min` with `mu(d) = c` for a strictly increasing `mu`.
///
/// Doubles an upper bracket up to 60 times, then runs Illinois-modified
/// regula falsi until `|mu(d) - c| ≤ 1e-13 max(1, |c|)` or the bracket collapses.
pub fn solve_d_for_c<M>(mu: M, c: f64, d_min: f64) -> Result<f64>
where
    M: Fn(f64) -> Result<f64>,
{
    if !c.is_finite() || !d_min.is_finite() {
        return invalid("c and d_min must be finite");
    }
    let scale = c.abs().max(1.0);
    let done = |v: f64| (v - c).abs() <= 1e-13 * scale;
    let mut lo = d_min;
    let mut f_lo = mu(lo)? - c;
    if done(f_lo + c) {
        return Ok(lo);
    }
    if f_lo > 0.0 {
        return Err(Error::BelowThreshold {
            c,
            threshold: f_lo + c,
        });
    }
    let mut step = 1.0f64.max(d_min.abs());
    let mut hi = lo + step;
    let mut f_hi = mu(hi)? - c;
    let mut doublings = 0;
    while f_hi < 0.0 {
        doublings += 1;
        if doublings > 60 {
            return Err(Error::NotBracketed(format!("mu(d) stays below c = {c} up to d = {hi}")));
        }
        lo = hi;
        f_lo = f_hi;
        step *= 2.0;
        hi = lo + step;
        f_hi = mu(hi)? - c;
    }
    if done(f_hi + c) {
        return Ok(hi);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let mut d = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(d > lo && d < hi) {
            d = 0.5 * (lo + hi);
        }
        let v = mu(d)? - c;
        if done(v + c) || hi - lo <= 1e-15 * hi.abs().max(1.0) {
            return Ok(d);
        }
        if v < 0.0 {
            lo = d;
            f_lo = v;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = d;
            f_hi = v;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `d - 1 + ∫_1^∞ 2t (f(t) - 1) dt` for a two-dimensional radial source.
pub fn log_coefficient(f: &dyn RadialFunction, d: f64) -> Result<f64> {
    Ok(d - 1.0 + excess_moment(f, 1.0)?)
}

/// Coefficient of `log r` in `u(r) - r²/2` for the two-dimensional exterior
/// profile with parameter `d`: half of [`log_coefficient`], because
/// `(s² + K)^(1/2) = s + K/(2s) + ...`.
pub fn log_growth_rate(f: &dyn RadialFunction, d: f64) -> Result<f64> {
    Ok(0.5 * log_coefficient(f, d)?)
}

/// `∫_0^∞ t (f(t) - 1) dt`, the log coefficient of the two-dimensional global solution.
pub fn global_log_coefficient(f: &dyn RadialFunction) -> Result<f64> {
    Ok(0.5 * excess_moment(f, 0.0)?)
}

/// `∫_a^∞ 2t (f(t) - 1) dt` with an analytic power tail.
fn excess_moment(f: &dyn RadialFunction, a: f64) -> Result<f64> {
    let tail = f.tail();
    if tail.amplitude != 0.0 && !(tail.exponent > 2.0) {
        return Err(Error::Divergent(format!(
            "∫ 2t (f - 1) dt diverges: f - 1 decays like r^-{}",
            tail.exponent
        )));
    }
    let split = 1e3f64.max(tail.from).max(a);
    let g = |t: f64| 2.0 * t * f.excess(t);
    let mut total = integrate_radial(&g, a, split, &f.breakpoints(), 1e-14);
    if tail.amplitude != 0.0 {
        let p = tail.exponent;
        total += 2.0 * tail.amplitude * split.powf(2.0 - p) / (p - 2.0);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::rhs::{ConstantRadial, RightHandSide};

    fn one() -> Arc<dyn RadialFunction> {
        Arc::new(ConstantRadial(1.0))
    }

    fn perturbed(n: usize, a: f64, p: f64) -> Arc<dyn RadialFunction> {
        Arc::new(RightHandSide::radial_perturbation(n, a, p, (1.0, 2.0)).unwrap().to_radial().unwrap())
    }

    #[test]
    fn mu1_of_identity_source_at_unit_d() {
        let v = mu1(one(), 3, 1.0, 2.0, 0.0).unwrap();
        assert!((v + 2.0).abs() < 1e-12, "{v}");
        let v = mu1(one(), 3, 1.0, 3.0, 1.5).unwrap();
        assert!((v - (1.5 - 4.5)).abs() < 1e-12);
    }

    #[test]
    fn mu1_matches_brute_force_integral() {
        // -2 + ∫_2^∞ ((s³+1)^(1/3) - s) ds; substitute s = 2/t to get a finite interval
        let g = |t: f64| {
            let s = 2.0 / t;
            let w = s * ((1.0 / (s * s * s)).ln_1p() / 3.0).exp_m1();
            w * 2.0 / (t * t)
        };
        let oracle = -2.0 + integrate(&g, 0.0, 1.0, 1e-15, 1e-15);
        let v = mu1(one(), 3, 2.0, 2.0, 0.0).unwrap();
        assert!((v - oracle).abs() <= 1e-8 * oracle.abs(), "{v} vs {oracle}");
    }

    #[test]
    fn mu_is_strictly_increasing_and_unbounded() {
        let f = perturbed(3, 1.0, 4.0);
        let vals: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&d| mu1(f.clone(), 3, d, 2.0, 0.0).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
        assert!(vals[3] > vals[0] + 1.0);
        let m2: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&d| mu2(f.clone(), 3, d, 0.0).unwrap())
            .collect();
        assert!(m2.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn analytic_tail_matches_split_radius_independence() {
        let f = perturbed(3, 0.7, 2.5);
        let a = far_field_constant(f.clone(), 3, 1.3, 2.0, 0.0).unwrap();
        // same constant with a hundredfold longer explicit quadrature range
        let p = RadialProfile::build(
            f.clone(),
            RadialSetup {
                r_max: 1e5,
                ..RadialSetup::exterior(3, 1.3, 2.0, 0.0)
            },
        )
        .unwrap();
        let b = p.w_at_end() + analytic_tail(3, 1e5, p.j_at_end(), &f.tail()).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn two_dimensions_are_rejected() {
        assert!(matches!(
            mu1(one(), 2, 1.0, 2.0, 0.0),
            Err(Error::UnsupportedDimension(2, _))
        ));
    }

    #[test]
    fn slow_tails_are_divergent() {
        let f: Arc<dyn RadialFunction> = Arc::new(RightHandSide::sharpness(3).unwrap().to_radial().unwrap());
        assert!(matches!(mu1(f, 3, 1.0, 2.0, 0.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn solve_inverts_mu() {
        let mu = |d: f64| mu1(one(), 3, d, 2.0, 0.0);
        assert!((solve_d_for_c(mu, -2.0, 0.0).unwrap() - 1.0).abs() < 1e-9);
        let c = mu(5.0).unwrap();
        assert!((solve_d_for_c(mu, c, 0.0).unwrap() - 5.0).abs() < 1e-9);
        let floor = mu(0.0).unwrap();
        assert!(matches!(
            solve_d_for_c(mu, floor - 1.0, 0.0),
            Err(Error::BelowThreshold { .. })
        ));
    }

    #[test]
    fn solve_reports_unbracketed_roots() {
        let r = solve_d_for_c(|d| Ok((1.0 + d).ln()), 1e300, 0.0);
        assert!(matches!(r, Err(Error::NotBracketed(_))));
    }

    #[test]
    fn log_coefficients() {
        assert_eq!(log_coefficient(&ConstantRadial(1.0), 1.0).unwrap(), 0.0);
        assert_eq!(log_coefficient(&ConstantRadial(1.0), 3.0).unwrap(), 2.0);
        let sharp = RightHandSide::sharpness(2).unwrap().to_radial().unwrap();
        assert!(matches!(log_coefficient(&sharp, 1.0), Err(Error::Divergent(_))));
        // ∫_1^∞ 2t r^-4 dt = 1 for a pure power beyond the bridge; compare with quadrature
        let f = RightHandSide::radial_perturbation(2, 1.0, 4.0, (1.0, 2.0)).unwrap().to_radial().unwrap();
        let head = integrate(&|t: f64| 2.0 * t * f.excess(t), 1.0, 2.0, 1e-15, 1e-15);
        let want = head + 2.0 * 0.25 / 2.0;
        assert!((log_coefficient(&f, 1.0).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn bump_moment_has_closed_form() {
        // ∫_0^w t a (1 - t²/w²)^4 dt = a w² / 10
        let f = RightHandSide::compact_bump(2, 1.0, vec![0.0, 0.0], 2.0).unwrap().to_radial().unwrap();
        assert!((global_log_coefficient(&f).unwrap() - 0.4).abs() < 1e-13);
    }
}
