use thiserror::Error;

/// Harness errors, split by exit code: configuration problems exit 1,
/// runtime problems exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<stoq_clock_core::CoreError> for CliError {
    fn from(e: stoq_clock_core::CoreError) -> Self {
        use stoq_clock_core::CoreError as E;
        match e {
            E::InvalidParam(_) | E::ShapeMismatch { .. } | E::StepSize { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
