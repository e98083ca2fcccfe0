use thiserror::Error;

/// Errors produced by the simulator and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Both quadrature contrasts are exactly zero, so `arg` is undefined.
    #[error("phase undefined: both quadrature contrasts are zero")]
    UndefinedPhase,

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("fit failed: {reason} (iterations: {iterations}, residual: {residual:.3e})")]
    Fit {
        reason: String,
        iterations: usize,
        residual: f64,
    },

    /// A sequence does not have the structure an analysis pass expects.
    #[error("sequence analysis: {0}")]
    Analysis(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {value}")))
    }
}
