use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("f is not positive at {point:?} (value {value})")]
    NonPositiveSource { point: Vec<f64>, value: f64 },

    #[error("derivative evaluation failed at {point:?}: {reason}")]
    Derivative { point: Vec<f64>, reason: String },

    #[error("degenerate shooting parameter: inner integral + d = {value} at s = {s}")]
    DegenerateShooting { s: f64, value: f64 },

    #[error("unsupported dimension n = {0}: {1}")]
    UnsupportedDimension(usize, String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("target c = {c} is not above the admissible threshold c_* = {threshold}")]
    BelowThreshold { c: f64, threshold: f64 },

    #[error("root not bracketed: {0}")]
    NotBracketed(String),

    #[error("barrier construction failed: {reason} (at {point:?})")]
    Barrier { reason: String, point: Vec<f64> },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("monotone iteration violated at node {node}: decrease of {amount:e}")]
    MonotonicityViolation { node: usize, amount: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("certificate failure: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
