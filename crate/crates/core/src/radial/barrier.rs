use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{sphere_directions, BoundaryPoint, InnerDomain};
use crate::error::{invalid, Error, Result};
use crate::problem::{BoundaryData, ProblemSpec};
use crate::radial::constants::{far_field_constant, solve_d_for_c};
use crate::radial::profile::{RadialProfile, RadialSetup, RadialTable};
use crate::rhs::{norm, EnvelopeSide, RadialEnvelope, RadialFunction, RightHandSide};

/// Largest tilt tried by the doubling search.
pub const TILT_CAP: f64 = 1_099_511_627_776.0; // 2^40

/// Default certificate sample count and seed.
pub const CERTIFICATE_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;

/// Touching barrier at a boundary point `ξ`:
/// `w(x) = φ(ξ) + (∇φ(ξ) + A ν)·(x - ξ) + (k/2)|x - ξ|²` with `k = κ^(1/n)`,
/// the global radial solution for the constant source `κ`, tilted by `A`
/// along the outward normal `ν`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointBarrier {
    pub xi: Vec<f64>,
    pub normal: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub tilt: f64,
    /// `κ^(1/n)`.
    pub scale: f64,
}

impl PointBarrier {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut lin = 0.0;
        let mut sq = 0.0;
        for i in 0..x.len() {
            let dx = x[i] - self.xi[i];
            lin += (self.gradient[i] + self.tilt * self.normal[i]) * dx;
            sq += dx * dx;
        }
        self.value + lin + 0.5 * self.scale * sq
    }

    /// `det D²w`, constant because the tilt is affine.
    pub fn det_hessian(&self) -> f64 {
        self.scale.powi(self.xi.len() as i32)
    }
}

/// Evidence that a point barrier touches `φ` from below at `ξ` only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarrierCertificate {
    /// `|w(ξ) - φ(ξ)|`.
    pub touching_error: f64,
    /// Largest `w - φ` over boundary samples other than `ξ` (negative when certified).
    pub max_gap: f64,
    pub det: f64,
    pub delta1: f64,
    /// Samples with tangential offset at most `δ₁` and beyond it.
    pub near_samples: usize,
    pub far_samples: usize,
    /// Smallest normal depth among the far samples.
    pub far_min_depth: f64,
    pub tilt: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds the tilted barrier at `xi` for the constant majorant `f1` of `f`,
/// doubling the tilt from 1 until `w < φ` on every boundary sample other than `ξ`.
pub fn point_barrier(
    xi: &BoundaryPoint,
    f1: f64,
    phi: &BoundaryData,
    boundary: &[BoundaryPoint],
    min_curvature: f64,
) -> Result<(PointBarrier, BarrierCertificate)> {
    let n = xi.point.len();
    if !(f1 > 0.0) {
        return invalid(format!("majorant level must be positive, got {f1}"));
    }
    if !(min_curvature > 0.0) {
        return invalid("domain must be strictly convex");
    }
    let mut barrier = PointBarrier {
        xi: xi.point.clone(),
        normal: xi.normal.clone(),
        value: phi.eval(&xi.point),
        gradient: phi.grad(&xi.point),
        tilt: 1.0,
        scale: f1.powf(1.0 / n as f64),
    };
    let delta1 = 0.1 * min_curvature;
    let separation = 1e-9 * (1.0 + norm(&xi.point));
    let (mut near, mut far, mut far_depth) = (0, 0, f64::INFINITY);
    for y in boundary {
        let off: Vec<f64> = y.point.iter().zip(&xi.point).map(|(a, b)| a - b).collect();
        let depth = -dot(&off, &xi.normal);
        let tangential = (dot(&off, &off) - depth * depth).max(0.0).sqrt();
        if norm(&off) <= separation {
            continue;
        }
        if tangential <= delta1 {
            near += 1;
        } else {
            far += 1;
            far_depth = far_depth.min(depth);
        }
    }
    let gap = |b: &PointBarrier| -> (f64, Option<Vec<f64>>) {
        let mut worst = f64::NEG_INFINITY;
        let mut at = None;
        for y in boundary {
            let dist = y.point.iter().zip(&xi.point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist <= separation {
                continue;
            }
            let g = b.eval(&y.point) - phi.eval(&y.point);
            if g > worst {
                worst = g;
                at = Some(y.point.clone());
            }
        }
        (worst, at)
    };
    loop {
        let (worst, at) = gap(&barrier);
        if worst < 0.0 {
            let cert = BarrierCertificate {
                touching_error: (barrier.eval(&xi.point) - barrier.value).abs(),
                max_gap: worst,
                det: barrier.det_hessian(),
                delta1,
                near_samples: near,
                far_samples: far,
                far_min_depth: far_depth,
                tilt: barrier.tilt,
            };
            return Ok((barrier, cert));
        }
        if barrier.tilt >= TILT_CAP {
            return Err(Error::Barrier {
                reason: format!("tilt search hit the cap 2^40 with w - φ = {worst:e}"),
                point: at.unwrap_or_default(),
            });
        }
        barrier.tilt *= 2.0;
    }
}

/// `w̲ = max_ξ w_ξ` over a finite set of touching barriers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarrierEnvelope {
    pub barriers: Vec<PointBarrier>,
    pub certificates: Vec<BarrierCertificate>,
    pub majorant: f64,
    /// Sampled bound `w̲(x) ≤ |x|²/2 + c1` on `B_{10 diam(D)} \ D`.
    pub c1: f64,
}

impl BarrierEnvelope {
    /// Builds barriers at 64 (2-D) or 256 (3-D) boundary points. The constant
    /// majorant is `1.1 max f` over samples of `B_{10 diam(D)} \ D` unless given.
    pub fn build(
        domain: &InnerDomain,
        rhs: &RightHandSide,
        phi: &BoundaryData,
        majorant: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        let n = domain.dim();
        let count = if n == 2 { 64 } else { 256 };
        let probe = if n == 2 { 2048 } else { 4096 };
        let reach = 10.0 * domain.diameter();
        let points = sample_exterior(domain, reach, 20_000, seed);
        let f_max = points.iter().map(|x| rhs.eval(x)).fold(0.0, f64::max);
        let f1 = majorant.unwrap_or(1.1 * f_max);
        if f1 < f_max {
            let x = points.iter().find(|x| rhs.eval(x) > f1).cloned().unwrap_or_default();
            return Err(Error::Barrier {
                reason: format!("majorant {f1} is below f = {f_max}"),
                point: x,
            });
        }
        let boundary = domain.boundary_samples(probe);
        let kappa = domain.min_curvature();
        let built: Vec<(PointBarrier, BarrierCertificate)> = domain
            .boundary_samples(count)
            .par_iter()
            .map(|xi| point_barrier(xi, f1, phi, &boundary, kappa))
            .collect::<Result<_>>()?;
        let (barriers, certificates): (Vec<_>, Vec<_>) = built.into_iter().unzip();
        let mut env = Self {
            barriers,
            certificates,
            majorant: f1,
            c1: 0.0,
        };
        env.c1 = points
            .iter()
            .map(|x| env.eval(x) - 0.5 * dot(x, x))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(env)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.barriers.iter().map(|b| b.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Up to `count` points of `B_reach(0) \ D`, uniform in radius and direction.
/// Gives up after `50 count` draws, so a thin or empty region yields fewer points.
fn sample_exterior(domain: &InnerDomain, reach: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..50 * count {
        if out.len() == count {
            break;
        }
        let dir = random_direction(&mut rng, n);
        let r = rng.gen_range(0.0..reach);
        let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
        if !domain.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = norm(&v);
        if len > 1e-3 && len <= 1.0 {
            return v.iter().map(|c| c / len).collect();
        }
    }
}

/// Everything about the barrier construction that does not depend on `c`.
#[derive(Clone)]
pub struct BarrierSetup {
    pub n: usize,
    pub domain: InnerDomain,
    pub phi: BoundaryData,
    pub envelope: BarrierEnvelope,
    pub upper: Arc<dyn RadialFunction>,
    pub lower: Arc<dyn RadialFunction>,
    pub rbar: f64,
    /// Radius of the largest ball about the origin inside `D`; base radius of the upper family.
    pub inner_radius: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub d_min: f64,
    pub d2_min: f64,
    /// Smallest `d` for which the lower family clears `w̲ + 1` on `|x| = r̄ + 1`.
    pub d0: f64,
    pub c_star: f64,
}

impl std::fmt::Debug for BarrierSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BarrierSetup")
            .field("rbar", &self.rbar)
            .field("beta1", &self.beta1)
            .field("beta2", &self.beta2)
            .field("d0", &self.d0)
            .field("c_star", &self.c_star)
            .finish()
    }
}

/// `d` making `∫_1^ρ n t^(n-1) f dt + d` slightly positive (and at least 0).
fn admissible_d(f: &dyn RadialFunction, n: usize, rho: f64) -> f64 {
    let src = |t: f64| n as f64 * t.powi(n as i32 - 1) * f.value(t);
    let (lo, hi) = if rho < 1.0 { (rho, 1.0) } else { (1.0, rho) };
    let mut i = crate::quadrature::integrate_radial(&src, lo, hi, &f.breakpoints(), 1e-15);
    if rho < 1.0 {
        i = -i;
    }
    (-i).max(0.0) + 1e-9
}

impl BarrierSetup {
    pub fn new(problem: &ProblemSpec, seed: u64) -> Result<Self> {
        let n = problem.n;
        if n < 3 {
            return Err(Error::UnsupportedDimension(
                n,
                "barrier pairs need a finite far-field constant".into(),
            ));
        }
        let domain = problem
            .domain
            .clone()
            .ok_or_else(|| Error::InvalidInput("barrier pairs need an inner domain".into()))?;
        let ff = &problem.far_field;
        let identity = (0..n).all(|i| (0..n).all(|j| (ff.a()[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14));
        if !identity || ff.b().iter().any(|&v| v != 0.0) {
            return invalid("barrier pairs are built for A = I, b = 0; transform the problem first");
        }
        let inner_radius = domain.inner_radius_about_origin();
        if !(inner_radius > 0.0) {
            return invalid("the origin must lie inside D");
        }
        let rbar = domain.circumradius();
        let envelope = BarrierEnvelope::build(&domain, &problem.rhs, &problem.phi, None, seed)?;
        let (upper, lower): (Arc<dyn RadialFunction>, Arc<dyn RadialFunction>) = if problem.rhs.is_radial() {
            let f = Arc::new(problem.rhs.to_radial()?);
            (f.clone(), f)
        } else {
            let reach = 1e3 * rbar.max(1.0);
            (
                Arc::new(RadialEnvelope::build(&problem.rhs, EnvelopeSide::Upper, reach)?),
                Arc::new(RadialEnvelope::build(&problem.rhs, EnvelopeSide::Lower, reach)?),
            )
        };

        let region = sample_exterior(&domain, rbar, 20_000, seed)
            .into_iter()
            .chain(domain.boundary_samples(if n == 2 { 512 } else { 2048 }).into_iter().map(|b| b.point));
        let w_min = region.map(|x| envelope.eval(&x)).fold(f64::INFINITY, f64::min);
        let beta1 = w_min - 1.0;
        let phi_max = domain
            .boundary_samples(if n == 2 { 512 } else { 2048 })
            .iter()
            .map(|b| problem.phi.eval(&b.point))
            .fold(f64::NEG_INFINITY, f64::max);
        let beta2 = phi_max + 1.0;

        let d_min = admissible_d(upper.as_ref(), n, inner_radius);
        let d2_min = admissible_d(lower.as_ref(), n, inner_radius);

        // glue: lower family above w̲ + 1 on |x| = r̄ + 1
        let glue_r = rbar + 1.0;
        let sphere = sphere_directions(n, if n == 2 { 256 } else { 1024 });
        let w_glue = sphere
            .iter()
            .map(|d| envelope.eval(&d.iter().map(|c| c * glue_r).collect::<Vec<_>>()))
            .fold(f64::NEG_INFINITY, f64::max);
        let at_glue = |d: f64| -> Result<f64> {
            let p = RadialProfile::build(
                upper.clone(),
                RadialSetup {
                    n,
                    d,
                    anchor: 1.0,
                    start: rbar,
                    base_radius: rbar,
                    base_value: beta1,
                    r_max: glue_r,
                },
            )?;
            Ok(p.u(glue_r))
        };
        let d0 = match solve_d_for_c(at_glue, w_glue + 1.0, d_min) {
            Ok(d) => d,
            Err(Error::BelowThreshold { .. }) => d_min,
            Err(e) => return Err(e),
        };
        let mu1 = far_field_constant(upper.clone(), n, d0, rbar, beta1)?;
        let mu2 = far_field_constant(lower.clone(), n, d2_min, inner_radius, beta2)?;
        Ok(Self {
            n,
            domain,
            phi: problem.phi.clone(),
            envelope,
            upper,
            lower,
            rbar,
            inner_radius,
            beta1,
            beta2,
            d_min,
            d2_min,
            d0,
            c_star: mu1.max(mu2),
        })
    }

    pub fn mu1(&self, d: f64) -> Result<f64> {
        far_field_constant(self.upper.clone(), self.n, d, self.rbar, self.beta1)
    }

    /// Far-field constant of the upper family, based at the inner radius.
    pub fn mu2(&self, d: f64) -> Result<f64> {
        far_field_constant(self.lower.clone(), self.n, d, self.inner_radius, self.beta2)
    }

    /// Matches both families to the far-field constant `c > c_*` and certifies the ordering.
    pub fn pair(&self, c: f64, seed: u64) -> Result<BarrierPair> {
        if !(c > self.c_star) {
            return Err(Error::BelowThreshold {
                c,
                threshold: self.c_star,
            });
        }
        let d = solve_d_for_c(|d| self.mu1(d), c, self.d0)?;
        let d2 = solve_d_for_c(|d| self.mu2(d), c, self.d2_min)?;
        let r_max = 1e4 * self.rbar.max(1.0);
        let lower_profile = RadialProfile::build(
            self.upper.clone(),
            RadialSetup {
                n: self.n,
                d,
                anchor: 1.0,
                start: self.inner_radius,
                base_radius: self.rbar,
                base_value: self.beta1,
                r_max,
            },
        )?;
        let upper_profile = RadialProfile::build(
            self.lower.clone(),
            RadialSetup {
                n: self.n,
                d: d2,
                anchor: 1.0,
                start: self.inner_radius,
                base_radius: self.inner_radius,
                base_value: self.beta2,
                r_max,
            },
        )?;
        let table_end = 64.0 * (self.rbar + 1.0);
        let spacing = 2e-3 * (self.rbar + 1.0);
        let mut pair = BarrierPair {
            sub_table: lower_profile.tabulate(self.inner_radius, table_end, spacing),
            super_table: upper_profile.tabulate(self.inner_radius, table_end, spacing),
            envelope: self.envelope.clone(),
            domain: self.domain.clone(),
            rbar: self.rbar,
            d,
            d2,
            c,
            beta1: self.beta1,
            beta2: self.beta2,
            c_star: self.c_star,
            certificate: None,
        };
        pair.certificate = Some(pair.certify(&self.phi, CERTIFICATE_SAMPLES, seed)?);
        Ok(pair)
    }
}

/// Ordering evidence for a barrier pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairCertificate {
    pub samples: usize,
    /// `min (super - sub)` over the random samples.
    pub min_margin: f64,
    /// Largest `|sub(ξ) - φ(ξ)|` over the touching points.
    pub touching_error: f64,
    /// `(r, super(r) - sub(r))` along a geometric radius ladder.
    pub gap_ladder: Vec<(f64, f64)>,
}

/// Glued subsolution `u_{1,d}` and radial supersolution `ū_{d₂}` sharing the
/// far-field constant `c`.
#[derive(Clone, Debug)]
pub struct BarrierPair {
    sub_table: RadialTable,
    super_table: RadialTable,
    envelope: BarrierEnvelope,
    domain: InnerDomain,
    rbar: f64,
    pub d: f64,
    pub d2: f64,
    pub c: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub c_star: f64,
    pub certificate: Option<PairCertificate>,
}

impl BarrierPair {
    /// `w̲` inside `B_r̄`, the lower radial family beyond `r̄ + 1`, their max between.
    /// NaN inside `D`.
    pub fn sub(&self, x: &[f64]) -> f64 {
        if self.domain.contains(x) && self.domain.signed_distance(x) < -1e-12 {
            return f64::NAN;
        }
        let r = norm(x);
        if r >= self.rbar + 1.0 {
            self.sub_table.u(r)
        } else if r < self.rbar {
            self.envelope.eval(x)
        } else {
            self.envelope.eval(x).max(self.sub_table.u(r))
        }
    }

    pub fn sup(&self, x: &[f64]) -> f64 {
        if self.domain.contains(x) && self.domain.signed_distance(x) < -1e-12 {
            return f64::NAN;
        }
        self.super_table.u(norm(x))
    }

    pub fn sub_profile(&self) -> &RadialProfile {
        self.sub_table.profile()
    }

    pub fn super_profile(&self) -> &RadialProfile {
        self.super_table.profile()
    }

    pub fn envelope(&self) -> &BarrierEnvelope {
        &self.envelope
    }

    fn certify(&self, phi: &BoundaryData, samples: usize, seed: u64) -> Result<PairCertificate> {
        let reach = 8.0 * (self.rbar + 1.0);
        let pts = sample_exterior(&self.domain, reach, samples, seed);
        let mut min_margin = f64::INFINITY;
        for x in &pts {
            let (lo, hi) = (self.sub(x), self.sup(x));
            let margin = hi - lo;
            if margin < -1e-9 * (1.0 + hi.abs()) {
                return Err(Error::Barrier {
                    reason: format!("sub exceeds super by {:e}", -margin),
                    point: x.clone(),
                });
            }
            min_margin = min_margin.min(margin);
        }
        let mut touching_error = 0.0f64;
        for b in &self.envelope.barriers {
            let err = (self.sub(&b.xi) - phi.eval(&b.xi)).abs();
            touching_error = touching_error.max(err);
            if self.sup(&b.xi) <= phi.eval(&b.xi) {
                return Err(Error::Barrier {
                    reason: "super does not dominate φ on the boundary".into(),
                    point: b.xi.clone(),
                });
            }
        }
        let n = self.envelope.barriers[0].xi.len();
        let mut gap_ladder = Vec::new();
        let mut r = self.rbar + 1.0;
        while r <= 1e3 * self.rbar.max(1.0) {
            let mut x = vec![0.0; n];
            x[0] = r;
            gap_ladder.push((r, self.sup(&x) - self.sub(&x)));
            r *= 2.0;
        }
        Ok(PairCertificate {
            samples: pts.len(),
            min_margin,
            touching_error,
            gap_ladder,
        })
    }
}

/// Builds the matched pair for `c`; fails with the computed threshold when `c ≤ c_*`.
pub fn build_barrier_pair(problem: &ProblemSpec, c: f64) -> Result<BarrierPair> {
    BarrierSetup::new(problem, DEFAULT_SEED)?.pair(c, DEFAULT_SEED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::far_field::QuadraticFarField;

    fn ball_problem(n: usize, radius: f64, rhs: RightHandSide) -> ProblemSpec {
        ProblemSpec::new(
            rhs,
            Some(InnerDomain::ball(vec![0.0; n], radius).unwrap()),
            BoundaryData::constant(0.0),
            QuadraticFarField::identity(n, 0.0).unwrap(),
            8.0 * radius,
        )
        .unwrap()
    }

    #[test]
    fn unit_ball_barrier_certifies() {
        let d = InnerDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let boundary = d.boundary_samples(2048);
        let phi = BoundaryData::constant(0.0);
        let xi = &d.boundary_samples(64)[5];
        let (b, cert) = point_barrier(xi, 1.1, &phi, &boundary, 1.0).unwrap();
        assert!(cert.max_gap < 0.0);
        assert!(cert.touching_error <= 1e-12);
        assert!((b.eval(&xi.point) - 0.0).abs() <= 1e-12);
        assert!((cert.det - 1.1).abs() < 1e-12);
        // on the unit ball w - φ = (k - A)|y - ξ|²/2, so the first tilt above k works
        assert_eq!(cert.tilt, 2.0);
        assert!(cert.near_samples > 0 && cert.far_samples > 0);
    }

    #[test]
    fn ellipse_barrier_with_varying_data() {
        let d = InnerDomain::ellipse([0.1, -0.2], (2.0, 1.0), 0.3).unwrap();
        let phi = BoundaryData::expr("x * y + 0.5 * x").unwrap();
        let rhs = RightHandSide::compact_bump(2, 0.5, vec![0.0, 0.0], 3.0).unwrap();
        let env = BarrierEnvelope::build(&d, &rhs, &phi, None, 42).unwrap();
        for (b, c) in env.barriers.iter().zip(&env.certificates) {
            assert!(c.max_gap < 0.0);
            assert!((env.eval(&b.xi) - phi.eval(&b.xi)).abs() < 1e-9);
            assert!(c.det >= 1.5);
        }
        assert!(env.c1.is_finite());
    }

    #[test]
    fn majorant_below_source_is_rejected() {
        let d = InnerDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let rhs = RightHandSide::constant(2, 2.0).unwrap();
        let r = BarrierEnvelope::build(&d, &rhs, &BoundaryData::constant(0.0), Some(1.5), 42);
        assert!(matches!(r, Err(Error::Barrier { .. })));
    }

    #[test]
    fn identity_source_pair_matches_far_field_and_orders() {
        let problem = ball_problem(3, 2.0, RightHandSide::one(3));
        let setup = BarrierSetup::new(&problem, 42).unwrap();
        let c = setup.c_star + 1.0;
        let pair = setup.pair(c, 42).unwrap();
        let cert = pair.certificate.as_ref().unwrap();
        assert!(cert.min_margin >= -1e-9);
        assert!(cert.touching_error < 1e-9);
        // both families approach |x|²/2 + c with an O(d/r) defect for f ≡ 1
        for far in [1e3, 1e4] {
            let lo = pair.sub_profile().w(far);
            let hi = pair.super_profile().w(far);
            let bound = pair.d.max(pair.d2) / (3.0 * far);
            assert!((lo - c).abs() < bound && (hi - c).abs() < bound, "{lo} {hi} {c}");
        }
        // the gap closes like r^(2-n)
        let g = &cert.gap_ladder;
        assert!(g.windows(2).all(|w| w[1].1 < w[0].1 && w[1].1 > 0.0));
        let (a, b) = (g[g.len() - 2], g[g.len() - 1]);
        assert!((b.1 * b.0 / (a.1 * a.0) - 1.0).abs() < 0.05, "{g:?}");
    }

    #[test]
    fn below_threshold_is_reported() {
        let problem = ball_problem(3, 1.0, RightHandSide::one(3));
        let setup = BarrierSetup::new(&problem, 42).unwrap();
        assert!(matches!(
            setup.pair(setup.c_star - 1.0, 42),
            Err(Error::BelowThreshold { .. })
        ));
    }

    #[test]
    fn pair_traps_exact_radial_solution() {
        let rhs = RightHandSide::radial_perturbation(3, 1.0, 4.0, (1.0, 2.0)).unwrap();
        let problem = ball_problem(3, 1.0, rhs.clone());
        let setup = BarrierSetup::new(&problem, 42).unwrap();
        let c = setup.c_star + 0.5;
        let pair = setup.pair(c, 42).unwrap();
        assert!(pair.d > pair.d2);
        // exact exterior solution with φ = 0 on |x| = 1 and the same constant
        let f: Arc<dyn RadialFunction> = Arc::new(rhs.to_radial().unwrap());
        let d = solve_d_for_c(|d| far_field_constant(f.clone(), 3, d, 1.0, 0.0), c, 1e-9).unwrap();
        let exact = RadialProfile::exact(f, 3, d, 1.0, 0.0).unwrap();
        for k in 0..200 {
            let r = 1.0 + 0.1 * k as f64;
            let x = [r, 0.0, 0.0];
            let u = exact.u(r);
            assert!(pair.sub(&x) <= u + 1e-9 && u <= pair.sup(&x) + 1e-9, "r={r}");
        }
    }
}
