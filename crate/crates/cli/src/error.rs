//! CLI error taxonomy and the exit-code contract.

use thiserror::Error;

/// Exit code for configuration/input problems.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for runtime/training failures.
pub const EXIT_TRAINING: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("training error: {0}")]
    Training(String),
}

impl CliError {
    /// 2 for configuration and input problems, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Format(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Training(_) => EXIT_TRAINING,
        }
    }
}

impl From<signgt_core::Error> for CliError {
    fn from(e: signgt_core::Error) -> Self {
        use signgt_core::Error::*;
        match e {
            // Bad user-supplied values.
            InvalidShape(_) | InvalidParameter(_) | InvalidInput(_) | InvalidSplit(_)
            | UndefinedMetric(_) => CliError::Config(e.to_string()),
            // Internal/run-time failures.
            ShapeMismatch(_) | NonFinite(_) | Tape(_) | TrainingFailure { .. } => {
                CliError::Training(e.to_string())
            }
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("invalid json: {e}"))
    }
}
