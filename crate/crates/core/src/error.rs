use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("matrix shape mismatch: expected {expected}x{expected}, got {got}x{got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("step-size precondition violated: dt*max_rate = {product:.3e} > {limit:.3e}")]
    StepSize { product: f64, limit: f64 },

    #[error("non-finite state encountered at step {step}")]
    NonFinite { step: usize },

    #[error("malformed input at line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("no spectral peak found")]
    NoPeak,

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}
