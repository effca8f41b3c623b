//! Radial solutions, far-field constants and barrier construction.

mod barrier;
mod constants;
mod profile;

pub use barrier::{
    build_barrier_pair, point_barrier, BarrierCertificate, BarrierEnvelope, BarrierPair, BarrierSetup, PointBarrier,
    PairCertificate, CERTIFICATE_SAMPLES, DEFAULT_SEED, TILT_CAP,
};
pub use constants::{
    far_field_constant, global_log_coefficient, log_coefficient, log_growth_rate, mu1, mu2, solve_d_for_c,
    SPLIT_FACTOR,
};
pub use profile::{radial_det, RadialProfile, RadialSetup, RadialTable, TailModel};

use std::sync::Arc;

use crate::error::Result;
use crate::rhs::RadialFunction;

/// `base + ∫_{r0}^r (∫_1^s n t^(n-1) f dt + d)^(1/n) ds`, or the global
/// solution with both lower limits at 0 when `r0 = 0`.
pub fn exact_radial_solution(f: Arc<dyn RadialFunction>, n: usize, d: f64, r0: f64, base: f64) -> Result<RadialProfile> {
    RadialProfile::exact(f, n, d, r0, base)
}
