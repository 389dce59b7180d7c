//! Error type shared by all solver and model components.

use thiserror::Error;

/// Errors produced by construction, evaluation and solver routines.
#[derive(Debug, Error)]
pub enum QbvError {
    /// A vector had the wrong length for the active discretization.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Picard iteration did not reach the requested tolerance.
    #[error("Picard iteration did not converge within {iterations} iterations (last residual {residual:.3e})")]
    IterationDiverged { iterations: usize, residual: f64 },

    /// A constructed object failed its own consistency check.
    #[error("construction error: {0}")]
    Construction(String),

    /// A function produced non-finite values where finite ones are required.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// The forward reference integrator could not certify its accuracy.
    #[error("forward oracle accuracy failure: {0}")]
    OracleAccuracy(String),

    /// An experiment or run configuration is inconsistent.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, QbvError>;

impl QbvError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        QbvError::Domain(msg.into())
    }
}
