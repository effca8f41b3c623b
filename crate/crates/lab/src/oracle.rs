use std::path::Path;
use std::sync::Arc;

use exterior_ma::radial::{exact_radial_solution, far_field_constant, global_log_coefficient, log_coefficient};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::spec::RadialOracleConfig;

#[derive(Clone, Debug, Serialize)]
pub struct OracleSample {
    pub r: f64,
    pub u: f64,
    pub u_prime: f64,
    pub u_second: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub n: usize,
    pub d: f64,
    pub r0: f64,
    pub det_residual: f64,
    /// Coefficient of `log r` in `u - r²/2` (n = 2).
    pub log_coefficient: Option<f64>,
    /// `lim (u - r²/2)` (n = 3, exterior profiles).
    pub far_field_constant: Option<f64>,
    pub samples: Vec<OracleSample>,
}

/// Builds the radial profile described by `cfg`, writing `profile.csv` and
/// `profile.json` into `out` when given.
pub fn run_oracle(cfg: &RadialOracleConfig, out: Option<&Path>) -> Result<OracleReport> {
    let rhs = cfg.rhs.build(cfg.n).map_err(|e| LabError::Config(e.to_string()))?;
    let radial = rhs.to_radial().map_err(|e| LabError::Config(e.to_string()))?;
    let profile = exact_radial_solution(Arc::new(radial.clone()), cfg.n, cfg.d, cfg.r0, cfg.base)?;
    let global = cfg.r0 == 0.0;
    let log_coefficient = match (cfg.n, global) {
        (2, true) => Some(global_log_coefficient(&radial)?),
        (2, false) => Some(log_coefficient(&radial, cfg.d)?),
        _ => None,
    };
    let far_field_constant = if cfg.n == 3 && !global {
        Some(far_field_constant(Arc::new(radial), 3, cfg.d, cfg.r0, cfg.base)?)
    } else {
        None
    };
    let samples = cfg
        .sample_radii
        .iter()
        .map(|&r| OracleSample {
            r,
            u: profile.u(r),
            u_prime: profile.u_prime(r),
            u_second: profile.u_second(r),
        })
        .collect();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        profile.export(&dir.join("profile.csv"), &dir.join("profile.json"))?;
    }
    Ok(OracleReport {
        n: cfg.n,
        d: profile.d(),
        r0: cfg.r0,
        det_residual: profile.det_residual(),
        log_coefficient,
        far_field_constant,
        samples,
    })
}
