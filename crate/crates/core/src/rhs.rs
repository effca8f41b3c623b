//! Source terms `f` for `det(D^2 u) = f`.
//!
//! Every kind is stored through its excess `g = f - 1` so that decay checks
//! and far-field integrals never subtract two numbers close to one.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// C^3 smoothstep on `[0, 1]`: value 0 at 0, 1 at 1, first three
/// derivatives vanish at both ends.
pub fn smoothstep7(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let t4 = t * t * t * t;
        t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RhsKind {
    /// `f == value`.
    Constant { value: f64 },
    /// `f = 1 + a r^-p` for `r >= r_hi`, `f = 1` for `r <= r_lo`, C^3 blend between.
    RadialPerturbation {
        amplitude: f64,
        exponent: f64,
        bridge: (f64, f64),
    },
    /// The borderline profile `f = 1` on `r <= 1`, `1 + r^-2` on `r >= 2`.
    Sharpness,
    /// `f = 1 + a (1 - s^2)^4` for `s = |x - center| / width < 1`.
    CompactBump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `f(x) = base(T x)`.
    AffinePullback {
        base: Box<RightHandSide>,
        map: DMatrix<f64>,
    },
}

/// A positive source term together with its declared decay class.
#[derive(Clone, Debug, PartialEq)]
pub struct RightHandSide {
    n: usize,
    kind: RhsKind,
    beta: f64,
    c0: f64,
}

impl RightHandSide {
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        check_dim(n)?;
        if !(value > 0.0) || !value.is_finite() {
            return invalid(format!("constant source must be positive, got {value}"));
        }
        let beta = if value == 1.0 { f64::INFINITY } else { 0.0 };
        Ok(Self {
            n,
            kind: RhsKind::Constant { value },
            beta,
            c0: value.max(1.0 / value),
        })
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, 1.0).expect("f == 1 is valid")
    }

    pub fn radial_perturbation(
        n: usize,
        amplitude: f64,
        exponent: f64,
        bridge: (f64, f64),
    ) -> Result<Self> {
        check_dim(n)?;
        let (lo, hi) = bridge;
        if !(lo > 0.0 && hi > lo) {
            return invalid(format!("bridge interval must satisfy 0 < r_lo < r_hi, got {bridge:?}"));
        }
        if !(exponent > 0.0) {
            return invalid("perturbation exponent must be positive");
        }
        // |g| <= |a| r_lo^-p on the support.
        let peak = amplitude.abs() * lo.powf(-exponent);
        if amplitude < 0.0 && peak >= 1.0 {
            return invalid(format!(
                "amplitude {amplitude} drives f non-positive inside the bridge"
            ));
        }
        let c0 = if amplitude >= 0.0 {
            1.0 + peak
        } else {
            1.0 / (1.0 - peak)
        };
        Ok(Self {
            n,
            kind: RhsKind::RadialPerturbation {
                amplitude,
                exponent,
                bridge,
            },
            beta: exponent,
            c0,
        })
    }

    pub fn sharpness(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            n,
            kind: RhsKind::Sharpness,
            beta: 2.0,
            c0: 2.0,
        })
    }

    pub fn compact_bump(n: usize, amplitude: f64, center: Vec<f64>, width: f64) -> Result<Self> {
        check_dim(n)?;
        if center.len() != n {
            return invalid(format!("bump center has {} coordinates, expected {n}", center.len()));
        }
        if !(width > 0.0) {
            return invalid("bump width must be positive");
        }
        if !(amplitude > -1.0) {
            return invalid(format!("bump amplitude {amplitude} makes f non-positive"));
        }
        let c0 = if amplitude >= 0.0 {
            1.0 + amplitude
        } else {
            1.0 / (1.0 + amplitude)
        };
        Ok(Self {
            n,
            kind: RhsKind::CompactBump {
                amplitude,
                center,
                width,
            },
            beta: f64::INFINITY,
            c0,
        })
    }

    /// `f(x) = base(T x)`; `T` must have unit determinant.
    pub fn affine_pullback(base: RightHandSide, map: DMatrix<f64>) -> Result<Self> {
        let n = base.n;
        if map.nrows() != n || map.ncols() != n {
            return invalid(format!("pullback map must be {n}x{n}"));
        }
        let det = map.determinant();
        if (det - 1.0).abs() > 1e-10 {
            return invalid(format!("pullback map must have det 1, got {det}"));
        }
        Ok(Self {
            n,
            beta: base.beta,
            c0: base.c0,
            kind: RhsKind::AffinePullback {
                base: Box::new(base),
                map,
            },
        })
    }

    /// Overrides the declared decay exponent.
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Overrides the positivity bound; it can only be loosened.
    pub fn with_c0(mut self, c0: f64) -> Result<Self> {
        if c0 < self.c0 {
            return invalid(format!(
                "c0 = {c0} is tighter than the bound {} implied by the parameters",
                self.c0
            ));
        }
        self.c0 = c0;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &RhsKind {
        &self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Whether the declared decay class meets the `beta > 2` requirement.
    pub fn declares_fa(&self) -> bool {
        self.beta > 2.0
    }

    pub fn is_radial(&self) -> bool {
        match &self.kind {
            RhsKind::Constant { .. } | RhsKind::RadialPerturbation { .. } | RhsKind::Sharpness => {
                true
            }
            RhsKind::CompactBump { center, .. } => center.iter().all(|&c| c == 0.0),
            RhsKind::AffinePullback { .. } => false,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        1.0 + self.excess(x)
    }

    /// `f(x) - 1`, evaluated without cancellation.
    pub fn excess(&self, x: &[f64]) -> f64 {
        match &self.kind {
            RhsKind::AffinePullback { base, map } => {
                let y = map * DVector::from_column_slice(x);
                base.excess(y.as_slice())
            }
            RhsKind::CompactBump {
                amplitude,
                center,
                width,
            } => {
                let s2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / (width * width);
                bump_profile(*amplitude, s2)
            }
            _ => self.radial_excess(norm(x)),
        }
    }

    /// Gradient of `f` by central differences with step proportional to `|x|`.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let h = 1e-6 * norm(x).max(1.0);
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                y[i] = x[i] + h;
                let plus = self.excess(&y);
                y[i] = x[i] - h;
                let minus = self.excess(&y);
                y[i] = x[i];
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    /// `f(r) - 1` for kinds that are radial about the origin. Non-radial kinds
    /// fall back to evaluating along the first axis.
    pub fn radial_excess(&self, r: f64) -> f64 {
        match &self.kind {
            RhsKind::Constant { value } => value - 1.0,
            RhsKind::RadialPerturbation {
                amplitude,
                exponent,
                bridge,
            } => perturbation_profile(*amplitude, *exponent, *bridge, r),
            RhsKind::Sharpness => perturbation_profile(1.0, 2.0, (1.0, 2.0), r),
            RhsKind::CompactBump {
                amplitude, width, ..
            } => bump_profile(*amplitude, (r / width) * (r / width)),
            RhsKind::AffinePullback { .. } => {
                let mut x = vec![0.0; self.n];
                x[0] = r;
                self.excess(&x)
            }
        }
    }

    /// Radial view of a radial source, for the quadrature engine.
    pub fn to_radial(&self) -> Result<RadialRhs> {
        if !self.is_radial() {
            return invalid("source term is not radial about the origin");
        }
        Ok(RadialRhs(self.clone()))
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        invalid(format!("dimension must be 2 or 3, got {n}"))
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn perturbation_profile(amplitude: f64, exponent: f64, bridge: (f64, f64), r: f64) -> f64 {
    let (lo, hi) = bridge;
    if r <= lo {
        0.0
    } else if r >= hi {
        amplitude * r.powf(-exponent)
    } else {
        smoothstep7((r - lo) / (hi - lo)) * amplitude * r.powf(-exponent)
    }
}

fn bump_profile(amplitude: f64, s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        let q = 1.0 - s2;
        amplitude * q * q * q * q
    }
}

/// Far-field behaviour of a radial excess `g(r)`: `g(r) = amplitude * r^-exponent`
/// exactly for `r >= from`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerTail {
    pub amplitude: f64,
    pub exponent: f64,
    pub from: f64,
}

/// A radial function `f(r)` as consumed by the quadrature engine.
pub trait RadialFunction: Send + Sync {
    /// `f(r) - 1`.
    fn excess(&self, r: f64) -> f64;

    fn value(&self, r: f64) -> f64 {
        1.0 + self.excess(r)
    }

    /// Radii where `f` is only finitely smooth; quadrature panels never straddle them.
    fn breakpoints(&self) -> Vec<f64>;

    fn tail(&self) -> PowerTail;
}

/// A radial source term viewed as a function of `r`.
#[derive(Clone, Debug)]
pub struct RadialRhs(RightHandSide);

impl RadialRhs {
    pub fn rhs(&self) -> &RightHandSide {
        &self.0
    }
}

impl RadialFunction for RadialRhs {
    fn excess(&self, r: f64) -> f64 {
        self.0.radial_excess(r)
    }

    fn breakpoints(&self) -> Vec<f64> {
        match &self.0.kind {
            RhsKind::RadialPerturbation { bridge, .. } => vec![bridge.0, bridge.1],
            RhsKind::Sharpness => vec![1.0, 2.0],
            RhsKind::CompactBump { width, .. } => vec![*width],
            _ => Vec::new(),
        }
    }

    fn tail(&self) -> PowerTail {
        match &self.0.kind {
            RhsKind::Constant { value } => PowerTail {
                amplitude: value - 1.0,
                exponent: 0.0,
                from: 0.0,
            },
            RhsKind::RadialPerturbation {
                amplitude,
                exponent,
                bridge,
            } => PowerTail {
                amplitude: *amplitude,
                exponent: *exponent,
                from: bridge.1,
            },
            RhsKind::Sharpness => PowerTail {
                amplitude: 1.0,
                exponent: 2.0,
                from: 2.0,
            },
            RhsKind::CompactBump { width, .. } => PowerTail {
                amplitude: 0.0,
                exponent: f64::INFINITY,
                from: *width,
            },
            RhsKind::AffinePullback { .. } => unreachable!("pullbacks are never radial views"),
        }
    }
}

/// A constant radial function, used for the point barriers.
#[derive(Clone, Copy, Debug)]
pub struct ConstantRadial(pub f64);

impl RadialFunction for ConstantRadial {
    fn excess(&self, _r: f64) -> f64 {
        self.0 - 1.0
    }

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn tail(&self) -> PowerTail {
        PowerTail {
            amplitude: self.0 - 1.0,
            exponent: 0.0,
            from: 0.0,
        }
    }
}

/// Which side of `f` a radial envelope bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeSide {
    Upper,
    Lower,
}

/// Piecewise-linear radial majorant or minorant of a (possibly non-radial)
/// source, tabulated on a ladder of spheres, with a power-law tail past the
/// last rung.
#[derive(Clone, Debug)]
pub struct RadialEnvelope {
    side: EnvelopeSide,
    radii: Vec<f64>,
    excess: Vec<f64>,
    tail: PowerTail,
}

impl RadialEnvelope {
    /// Samples `f - 1` on spheres of a ladder reaching `r_max`, takes the
    /// extreme over each sphere, then widens each rung to the extreme of its
    /// neighbours plus a margin so the envelope dominates between rungs.
    pub fn build(rhs: &RightHandSide, side: EnvelopeSide, r_max: f64) -> Result<Self> {
        if rhs.is_radial() {
            // exact: no sampling needed, but keep the same representation
            let radial = rhs.to_radial()?;
            let radii = envelope_ladder(r_max);
            let excess = radii.iter().map(|&r| radial.excess(r)).collect();
            return Ok(Self {
                side,
                radii,
                excess,
                tail: radial.tail(),
            });
        }
        let n = rhs.dim();
        let radii = envelope_ladder(r_max);
        let dirs = crate::domain::sphere_directions(n, if n == 2 { 128 } else { 400 });
        let raw: Vec<f64> = radii
            .iter()
            .map(|&r| {
                let vals = dirs.iter().map(|d| {
                    let x: Vec<f64> = d.iter().map(|c| c * r).collect();
                    rhs.excess(&x)
                });
                match side {
                    EnvelopeSide::Upper => vals.fold(f64::NEG_INFINITY, f64::max),
                    EnvelopeSide::Lower => vals.fold(f64::INFINITY, f64::min),
                }
            })
            .collect();
        let spread = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let margin = 1e-3 * spread + 1e-9;
        let k = raw.len();
        let excess: Vec<f64> = (0..k)
            .map(|i| {
                let window = &raw[i.saturating_sub(1)..(i + 2).min(k)];
                match side {
                    EnvelopeSide::Upper => window.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) + margin,
                    EnvelopeSide::Lower => {
                        let lo = window.iter().fold(f64::INFINITY, |a, &b| a.min(b)) - margin;
                        // keep the minorant positive
                        lo.max(-1.0 + 0.5 / rhs.c0())
                    }
                }
            })
            .collect();
        let last_r = *radii.last().unwrap();
        let last = *excess.last().unwrap();
        let beta = if rhs.beta().is_finite() { rhs.beta() } else { 8.0 };
        let tail = PowerTail {
            amplitude: last * last_r.powf(beta),
            exponent: beta,
            from: last_r,
        };
        Ok(Self {
            side,
            radii,
            excess,
            tail,
        })
    }

    pub fn side(&self) -> EnvelopeSide {
        self.side
    }
}

fn envelope_ladder(r_max: f64) -> Vec<f64> {
    let mut radii = vec![0.0];
    let mut r = 0.125;
    while r < 1.0 {
        radii.push(r);
        r += 0.125;
    }
    let mut r = 1.0;
    while r < r_max * 1.05 {
        radii.push(r);
        r *= 1.05;
    }
    radii
}

impl RadialFunction for RadialEnvelope {
    fn excess(&self, r: f64) -> f64 {
        let last = *self.radii.last().unwrap();
        if r >= last {
            return self.tail.amplitude * r.powf(-self.tail.exponent);
        }
        let i = match self.radii.partition_point(|&x| x <= r) {
            0 => 0,
            k => k - 1,
        };
        let (r0, r1) = (self.radii[i], self.radii[i + 1]);
        let t = (r - r0) / (r1 - r0);
        self.excess[i] * (1.0 - t) + self.excess[i + 1] * t
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.radii.clone()
    }

    fn tail(&self) -> PowerTail {
        self.tail
    }
}
