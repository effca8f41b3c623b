//! Problem specifications and their JSON configuration form.

use std::fmt;
use std::path::Path;

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node,
    Value,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::InnerDomain;
use crate::error::{invalid, Error, Result};
use crate::far_field::{FarFieldConfig, QuadraticFarField};
use crate::rhs::{norm, RhsKind, RightHandSide};

/// Dirichlet data `φ` on `∂D`, a closed-form expression in `x`, `y`, `z`, `r`.
#[derive(Clone)]
pub struct BoundaryData {
    source: String,
    kind: PhiKind,
}

#[derive(Clone)]
enum PhiKind {
    Constant(f64),
    Expr(Node<DefaultNumericTypes>),
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoundaryData({:?})", self.source)
    }
}

impl PartialEq for BoundaryData {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl BoundaryData {
    pub fn constant(value: f64) -> Self {
        Self {
            source: format!("{value:?}"),
            kind: PhiKind::Constant(value),
        }
    }

    /// Parses an arithmetic expression such as `0.5*(x^2+y^2) + 1`.
    pub fn expr(source: &str) -> Result<Self> {
        if let Ok(v) = source.trim().parse::<f64>() {
            return Ok(Self {
                source: source.to_string(),
                kind: PhiKind::Constant(v),
            });
        }
        let node = build_operator_tree::<DefaultNumericTypes>(source)
            .map_err(|e| Error::InvalidInput(format!("cannot parse phi `{source}`: {e}")))?;
        let phi = Self {
            source: source.to_string(),
            kind: PhiKind::Expr(node),
        };
        // probe once so syntax-valid but ill-typed expressions fail early
        phi.try_eval(&[1.0, 1.0, 1.0])?;
        Ok(phi)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn try_eval(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            PhiKind::Constant(v) => Ok(*v),
            PhiKind::Expr(node) => {
                let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
                for (name, i) in [("x", 0), ("y", 1), ("z", 2)] {
                    let v = x.get(i).copied().unwrap_or(0.0);
                    ctx.set_value(name.into(), Value::Float(v))
                        .map_err(|e| Error::Internal(e.to_string()))?;
                }
                ctx.set_value("r".into(), Value::Float(norm(x)))
                    .map_err(|e| Error::Internal(e.to_string()))?;
                match node.eval_with_context(&ctx) {
                    Ok(Value::Float(v)) => Ok(v),
                    Ok(Value::Int(v)) => Ok(v as f64),
                    Ok(other) => invalid(format!("phi evaluates to non-number {other:?}")),
                    Err(e) => invalid(format!("phi `{}` failed: {e}", self.source)),
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        if let PhiKind::Constant(_) = self.kind {
            return vec![0.0; x.len()];
        }
        let h = 1e-6;
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                y[i] = x[i] + h;
                let p = self.eval(&y);
                y[i] = x[i] - h;
                let m = self.eval(&y);
                y[i] = x[i];
                (p - m) / (2.0 * h)
            })
            .collect()
    }
}

/// An exterior (or, without `domain`, global) Dirichlet problem truncated at `r_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub rhs: RightHandSide,
    pub domain: Option<InnerDomain>,
    pub phi: BoundaryData,
    pub far_field: QuadraticFarField,
    pub r_out: f64,
}

impl ProblemSpec {
    pub fn new(
        rhs: RightHandSide,
        domain: Option<InnerDomain>,
        phi: BoundaryData,
        far_field: QuadraticFarField,
        r_out: f64,
    ) -> Result<Self> {
        let n = rhs.dim();
        if far_field.dim() != n {
            return invalid(format!("far field has dimension {}, rhs {n}", far_field.dim()));
        }
        if let Some(d) = &domain {
            if d.dim() != n {
                return invalid(format!("domain has dimension {}, rhs {n}", d.dim()));
            }
            let rbar = d.circumradius();
            if r_out < 4.0 * rbar {
                return invalid(format!("R_out = {r_out} must be at least 4 r̄ = {}", 4.0 * rbar));
            }
        }
        if !(r_out > 0.0) {
            return invalid("R_out must be positive");
        }
        Ok(Self {
            n,
            rhs,
            domain,
            phi,
            far_field,
            r_out,
        })
    }

    /// Circumradius of the hole, zero for global problems.
    pub fn rbar(&self) -> f64 {
        self.domain.as_ref().map_or(0.0, |d| d.circumradius())
    }

    pub fn from_config(cfg: &ProblemConfig) -> Result<Self> {
        let rhs = cfg.rhs.build(cfg.n)?;
        let domain = cfg.domain.as_ref().map(|d| d.build(cfg.n)).transpose()?;
        let phi = BoundaryData::expr(&cfg.phi.expr)?;
        let far_field = QuadraticFarField::from_config(&cfg.far_field)?;
        Self::new(rhs, domain, phi, far_field, cfg.r_out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProblemConfig = serde_json::from_str(text)?;
        Self::from_config(&cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_config(&self) -> ProblemConfig {
        ProblemConfig {
            n: self.n,
            rhs: RhsConfig::from_rhs(&self.rhs),
            domain: self.domain.as_ref().map(DomainConfig::from_domain),
            phi: PhiConfig {
                expr: self.phi.source().to_string(),
            },
            far_field: self.far_field.to_config(),
            r_out: self.r_out,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProblemConfig {
    pub n: usize,
    pub rhs: RhsConfig,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    pub phi: PhiConfig,
    pub far_field: FarFieldConfig,
    #[serde(rename = "R_out")]
    pub r_out: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PhiConfig {
    pub expr: String,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RhsKindName {
    Constant,
    RadialPerturbation,
    Sharpness,
    CompactBump,
    AffinePullback,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RhsParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Row-major pullback matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<RhsConfig>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RhsConfig {
    pub kind: RhsKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default)]
    pub params: RhsParams,
}

impl RhsConfig {
    pub fn build(&self, n: usize) -> Result<RightHandSide> {
        let p = &self.params;
        let rhs = match self.kind {
            RhsKindName::Constant => RightHandSide::constant(n, p.value.unwrap_or(1.0))?,
            RhsKindName::RadialPerturbation => {
                let bridge = p.bridge.unwrap_or([1.0, 2.0]);
                RightHandSide::radial_perturbation(
                    n,
                    p.amplitude.unwrap_or(1.0),
                    p.exponent
                        .or(self.beta)
                        .ok_or_else(|| Error::InvalidInput("radial_perturbation needs an exponent".into()))?,
                    (bridge[0], bridge[1]),
                )?
            }
            RhsKindName::Sharpness => RightHandSide::sharpness(n)?,
            RhsKindName::CompactBump => RightHandSide::compact_bump(
                n,
                p.amplitude.unwrap_or(1.0),
                p.center.clone().unwrap_or_else(|| vec![0.0; n]),
                p.width.unwrap_or(1.0),
            )?,
            RhsKindName::AffinePullback => {
                let base = p
                    .base
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("affine_pullback needs a base".into()))?
                    .build(n)?;
                let map = p
                    .map
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("affine_pullback needs a map".into()))?;
                if map.len() != n * n {
                    return invalid(format!("pullback map needs {} entries", n * n));
                }
                RightHandSide::affine_pullback(base, DMatrix::from_row_slice(n, n, map))?
            }
        };
        let rhs = match self.beta {
            Some(b) => rhs.with_beta(b),
            None => rhs,
        };
        match self.c0 {
            Some(c0) => rhs.with_c0(c0),
            None => Ok(rhs),
        }
    }

    pub fn from_rhs(rhs: &RightHandSide) -> Self {
        let mut params = RhsParams::default();
        let kind = match rhs.kind() {
            RhsKind::Constant { value } => {
                params.value = Some(*value);
                RhsKindName::Constant
            }
            RhsKind::RadialPerturbation {
                amplitude,
                exponent,
                bridge,
            } => {
                params.amplitude = Some(*amplitude);
                params.exponent = Some(*exponent);
                params.bridge = Some([bridge.0, bridge.1]);
                RhsKindName::RadialPerturbation
            }
            RhsKind::Sharpness => RhsKindName::Sharpness,
            RhsKind::CompactBump {
                amplitude,
                center,
                width,
            } => {
                params.amplitude = Some(*amplitude);
                params.center = Some(center.clone());
                params.width = Some(*width);
                RhsKindName::CompactBump
            }
            RhsKind::AffinePullback { base, map } => {
                let n = map.nrows();
                params.map = Some((0..n * n).map(|k| map[(k / n, k % n)]).collect());
                params.base = Some(Box::new(Self::from_rhs(base)));
                RhsKindName::AffinePullback
            }
        };
        Self {
            kind,
            beta: rhs.beta().is_finite().then_some(rhs.beta()),
            c0: Some(rhs.c0()),
            params,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainConfig {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
}

impl DomainConfig {
    pub fn build(&self, n: usize) -> Result<InnerDomain> {
        let d = match self {
            Self::Ball { center, radius } => InnerDomain::ball(center.clone(), *radius)?,
            Self::Ellipse {
                center,
                semi_axes,
                angle,
            } => InnerDomain::ellipse(*center, (semi_axes[0], semi_axes[1]), *angle)?,
        };
        if d.dim() != n {
            return invalid(format!("domain dimension {} does not match n = {n}", d.dim()));
        }
        Ok(d)
    }

    pub fn from_domain(d: &InnerDomain) -> Self {
        match d {
            InnerDomain::Ball { center, radius } => Self::Ball {
                center: center.clone(),
                radius: *radius,
            },
            InnerDomain::Ellipse {
                center,
                semi_axes,
                angle,
            } => Self::Ellipse {
                center: *center,
                semi_axes: [semi_axes.0, semi_axes.1],
                angle: *angle,
            },
        }
    }
}
