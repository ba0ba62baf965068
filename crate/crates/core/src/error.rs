use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QcError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A geometric constraint on the chain, region decomposition or mesh failed.
    #[error("mesh validation failed ({rule}): {detail}")]
    Validation { rule: &'static str, detail: String },

    /// A bond or element stretch left the potential's domain.
    #[error("nonpositive stretch {value} in {location}")]
    Domain { location: String, value: f64 },

    #[error("solver failed after {iterations} iterations: {reason}")]
    Solver { iterations: usize, reason: String },

    /// The a posteriori coercivity constant is not positive.
    #[error("stability lost: A_* = {a_star}")]
    StabilityLost { a_star: f64 },

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl QcError {
    pub(crate) fn validation(rule: &'static str, detail: impl Into<String>) -> Self {
        QcError::Validation {
            rule,
            detail: detail.into(),
        }
    }

    pub(crate) fn param(detail: impl Into<String>) -> Self {
        QcError::InvalidParameter(detail.into())
    }
}

impl From<std::io::Error> for QcError {
    fn from(e: std::io::Error) -> Self {
        QcError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QcError>;
