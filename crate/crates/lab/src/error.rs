use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Malformed or inconsistent configuration; maps to exit code 2.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] exterior_ma::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

/// The error followed by its sources, outermost first.
pub fn error_chain(e: &dyn std::error::Error) -> Vec<String> {
    let mut out = vec![e.to_string()];
    let mut src = e.source();
    while let Some(s) = src {
        out.push(s.to_string());
        src = s.source();
    }
    out
}
