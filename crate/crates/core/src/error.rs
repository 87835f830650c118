use thiserror::Error;

#[derive(Debug, Error)]
pub enum GlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { what: String, iterations: usize, residual: f64 },
    #[error("corrector failed: {reason}")]
    Corrector { reason: String, report: Box<crate::solver::SolveReport> },
    #[error("singular input: {0}")]
    Singular(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("unsupported cell shape: {0}")]
    Shape(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GlError {
    /// Successive corrections stopped shrinking: the cell is below the contraction scale.
    pub fn is_non_contraction(&self) -> bool {
        matches!(self, GlError::Corrector { reason, .. } if reason == "non_contraction")
    }
}

pub type Result<T> = std::result::Result<T, GlError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(GlError::InvalidInput(msg.into()))
}
