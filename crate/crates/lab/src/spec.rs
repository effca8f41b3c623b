use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use exterior_ma::problem::ProblemConfig;
use exterior_ma::radial::DEFAULT_SEED;
use exterior_ma::rhs::RhsKind;
use exterior_ma::solver::SolverOptions;
use exterior_ma::ProblemSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentId {
    /// Existence with prescribed far field: barrier pair, grid solve, decay rate.
    #[serde(rename = "E-T5")]
    Existence,
    /// Big-ball approximations squeezed between radial envelopes.
    #[serde(rename = "E-T3")]
    BigBall,
    /// Planar log coefficient against the integral of `f - 1`.
    #[serde(rename = "E-T1-2D")]
    PlanarLog,
    /// Sub- and super-initialized solves reach the same discrete solution.
    #[serde(rename = "E-UNIQ")]
    Uniqueness,
    /// `f = 1 + r^-2` grows faster than any constant-c expansion allows.
    #[serde(rename = "E-SHARP")]
    Sharpness,
    /// Decay-ladder check of a right-hand side against a claimed `beta`.
    #[serde(rename = "E-FA")]
    DecayCondition,
    /// Touching barriers on the hole boundary (and the matched pair in 3-D).
    #[serde(rename = "E-BARRIER")]
    Barrier,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        Self::Existence,
        Self::BigBall,
        Self::PlanarLog,
        Self::Uniqueness,
        Self::Sharpness,
        Self::DecayCondition,
        Self::Barrier,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Existence => "E-T5",
            Self::BigBall => "E-T3",
            Self::PlanarLog => "E-T1-2D",
            Self::Uniqueness => "E-UNIQ",
            Self::Sharpness => "E-SHARP",
            Self::DecayCondition => "E-FA",
            Self::Barrier => "E-BARRIER",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SolverKnobs {
    /// Mesh widths, coarse to fine.
    pub h: Vec<f64>,
    /// Stencil width `W`.
    pub width: usize,
    pub tol: f64,
    pub max_newton: usize,
    pub max_sweeps: usize,
}

impl Default for SolverKnobs {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            h: vec![0.25],
            width: 2,
            tol: o.tol,
            max_newton: o.max_newton,
            max_sweeps: o.max_sweeps,
        }
    }
}

impl SolverKnobs {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_newton: self.max_newton,
            max_sweeps: self.max_sweeps,
            ..SolverOptions::default()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FitKnobs {
    /// Window for fits of radial profiles.
    pub oracle_window: [f64; 2],
    /// Window for fits of grid solutions; must end by `R_out / 2`.
    pub grid_window: [f64; 2],
}

impl Default for FitKnobs {
    fn default() -> Self {
        Self {
            oracle_window: [100.0, 1000.0],
            grid_window: [2.0, 8.0],
        }
    }
}

/// Verdict thresholds. Every field can be overridden from the command line.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Thresholds {
    /// Exponent band for grid solutions.
    pub grid_band: f64,
    /// Exponent band for radial profiles.
    pub radial_band: f64,
    /// Relative error allowed on the planar log coefficient from radial samples.
    pub log_coefficient_radial: f64,
    /// Same, from a grid solution.
    pub log_coefficient_grid: f64,
    /// Relative band on the sharpness growth coefficient.
    pub growth_band: f64,
    /// Coefficient below which growth counts as bounded.
    pub growth_control: f64,
    /// Allowed sub/super gap in multiples of the solver tolerance.
    pub uniqueness_factor: f64,
    /// Barrier sandwich slack in multiples of `h²`.
    pub sandwich_factor: f64,
    /// Largest allowed `|w(ξ) - φ(ξ)|` at touching points.
    pub touching: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            grid_band: 0.15,
            radial_band: 0.05,
            log_coefficient_radial: 0.01,
            log_coefficient_grid: 0.05,
            growth_band: 0.05,
            growth_control: 1e-6,
            uniqueness_factor: 10.0,
            sandwich_factor: 10.0,
            touching: 1e-9,
        }
    }
}

impl Thresholds {
    /// Applies `key=value` pairs.
    pub fn apply(&mut self, overrides: &BTreeMap<String, f64>) -> Result<()> {
        let mut value = serde_json::to_value(&*self)?;
        let map = value.as_object_mut().expect("thresholds serialize to an object");
        for (k, v) in overrides {
            if !map.contains_key(k) {
                return Err(LabError::Config(format!("unknown threshold `{k}`")));
            }
            map.insert(k.clone(), serde_json::json!(v));
        }
        *self = serde_json::from_value(value)?;
        Ok(())
    }
}

/// Parses `a=1,b=2e-3`.
pub fn parse_overrides(text: &str) -> Result<BTreeMap<String, f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("override `{pair}` is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| LabError::Config(format!("override `{pair}` has a non-numeric value")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    /// Optional label distinguishing several runs of one id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverKnobs,
    #[serde(default)]
    pub fit: FitKnobs,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Big-ball radii (E-T3).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radii: Vec<f64>,
    /// Decay exponent under test (E-FA); defaults to the one declared by the source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed_beta: Option<f64>,
    /// Distance of the target constant above the threshold `c_*` (E-T5, E-UNIQ, E-BARRIER).
    #[serde(default = "default_c_offset")]
    pub c_offset: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_c_offset() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, problem: ProblemConfig) -> Self {
        Self {
            id,
            name: None,
            problem,
            solver: SolverKnobs::default(),
            fit: FitKnobs::default(),
            thresholds: Thresholds::default(),
            radii: Vec::new(),
            claimed_beta: None,
            c_offset: default_c_offset(),
            seed: default_seed(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Name used for report files.
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.id.label().to_string())
    }

    /// Builds the problem and checks the id-specific preconditions.
    pub fn validate(&self) -> Result<ProblemSpec> {
        let problem = ProblemSpec::from_config(&self.problem).map_err(|e| LabError::Config(e.to_string()))?;
        let n = problem.n;
        let bad = |msg: String| Err(LabError::Config(format!("{}: {msg}", self.id)));
        let s = &self.solver;
        if s.h.is_empty() || s.h.iter().any(|h| !(*h > 0.0)) {
            return bad("the h ladder must be non-empty and positive".into());
        }
        if s.width == 0 || !(s.tol > 0.0) {
            return bad("width and tol must be positive".into());
        }
        for w in [self.fit.oracle_window, self.fit.grid_window] {
            if !(w[0] > 0.0 && w[1] > w[0]) {
                return bad(format!("fit window {w:?} is not an interval"));
            }
        }
        match self.id {
            ExperimentId::Existence | ExperimentId::Uniqueness => {
                if n != 3 {
                    return bad("needs n = 3, where the far-field constant is finite".into());
                }
                if problem.domain.is_none() {
                    return bad("needs a hole".into());
                }
                if !(self.c_offset > 0.0) {
                    return bad("c_offset must be positive".into());
                }
            }
            ExperimentId::BigBall => {
                if self.radii.len() < 2 {
                    return bad("needs a radius ladder of at least 2 values".into());
                }
                if self.radii.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("radii must increase".into());
                }
            }
            ExperimentId::PlanarLog => {
                if n != 2 {
                    return bad("needs n = 2".into());
                }
                if !problem.rhs.is_radial() {
                    return bad("needs a radial right-hand side".into());
                }
                if self.fit.grid_window[1] > 0.5 * problem.r_out {
                    return bad(format!("grid window must end by R_out/2 = {}", 0.5 * problem.r_out));
                }
            }
            ExperimentId::Sharpness => {
                if !matches!(problem.rhs.kind(), RhsKind::Sharpness) {
                    return bad("needs the sharpness right-hand side".into());
                }
            }
            ExperimentId::DecayCondition => {
                let beta = self.claimed_beta.unwrap_or(problem.rhs.beta());
                if !beta.is_finite() {
                    return bad("needs a finite claimed beta".into());
                }
            }
            ExperimentId::Barrier => {
                if problem.domain.is_none() {
                    return bad("needs a hole".into());
                }
            }
        }
        Ok(problem)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("specs serialize");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SuiteConfig {
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Input of the `oracle` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RadialOracleConfig {
    pub n: usize,
    pub rhs: exterior_ma::problem::RhsConfig,
    /// Shooting parameter; ignored for global profiles.
    #[serde(default = "default_d")]
    pub d: f64,
    /// Start radius; 0 selects the global profile.
    #[serde(default)]
    pub r0: f64,
    #[serde(default)]
    pub base: f64,
    /// Radii at which to tabulate `u`, `u'`, `u''`.
    #[serde(default)]
    pub sample_radii: Vec<f64>,
}

fn default_d() -> f64 {
    1.0
}
