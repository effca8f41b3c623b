use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Target behaviour at infinity: `1/2 x'Ax + b.x + c + d log sqrt(x'Ax)`.
///
/// `A` is symmetric positive definite with unit determinant. The log
/// coefficient `d` only carries meaning in two dimensions and is forced to
/// zero in three.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticFarField {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    d: f64,
}

/// Row-major serialized form used in configs and reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FarFieldConfig {
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub d: f64,
}

impl QuadraticFarField {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64, d: f64) -> Result<Self> {
        let n = a.nrows();
        if !(n == 2 || n == 3) || a.ncols() != n {
            return invalid(format!("A must be 2x2 or 3x3, got {}x{}", a.nrows(), a.ncols()));
        }
        if b.len() != n {
            return invalid(format!("b has length {}, expected {n}", b.len()));
        }
        let scale = a.amax().max(1.0);
        if (&a - a.transpose()).amax() > 1e-12 * scale {
            return invalid("A is not symmetric");
        }
        if a.clone().cholesky().is_none() {
            return invalid("A is not positive definite");
        }
        let det = a.determinant();
        if (det - 1.0).abs() > 1e-12 {
            return invalid(format!("det(A) = {det}, expected 1"));
        }
        if n == 3 && d != 0.0 {
            return invalid("the log coefficient d must be 0 in three dimensions");
        }
        if !c.is_finite() || !d.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return invalid("far-field coefficients must be finite");
        }
        Ok(Self { a, b, c, d })
    }

    /// `1/2 |x|^2 + c` in dimension `n`.
    pub fn identity(n: usize, c: f64) -> Result<Self> {
        Self::new(DMatrix::identity(n, n), DVector::zeros(n), c, 0.0)
    }

    pub fn from_config(cfg: &FarFieldConfig) -> Result<Self> {
        let n = cfg.b.len();
        if cfg.a.len() != n * n {
            return invalid(format!("A has {} entries, expected {}", cfg.a.len(), n * n));
        }
        Self::new(
            DMatrix::from_row_slice(n, n, &cfg.a),
            DVector::from_column_slice(&cfg.b),
            cfg.c,
            cfg.d,
        )
    }

    pub fn to_config(&self) -> FarFieldConfig {
        let n = self.dim();
        let mut a = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(self.a[(i, j)]);
            }
        }
        FarFieldConfig {
            a,
            b: self.b.iter().copied().collect(),
            c: self.c,
            d: self.d,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    fn quad_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += x[i] * self.a[(i, j)] * x[j];
            }
        }
        s
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let q = self.quad_form(x);
        let lin: f64 = x.iter().zip(self.b.iter()).map(|(a, b)| a * b).sum();
        let log = if self.d != 0.0 { 0.5 * self.d * q.ln() } else { 0.0 };
        0.5 * q + lin + self.c + log
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let q = self.quad_form(x);
        (0..n)
            .map(|i| {
                let ax: f64 = (0..n).map(|j| self.a[(i, j)] * x[j]).sum();
                ax * (1.0 + if self.d != 0.0 { self.d / q } else { 0.0 }) + self.b[i]
            })
            .collect()
    }
}
