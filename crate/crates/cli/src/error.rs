use std::process::ExitCode;

use thiserror::Error;

/// Command failure, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation or configuration (exit 2).
    #[error("{0}")]
    Usage(String),
    /// The run itself failed: divergence, unreadable checkpoint, I/O (exit 1).
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        Self::Usage(e.to_string())
    }

    pub fn failed(e: impl std::fmt::Display) -> Self {
        Self::Failed(e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Failed(_) => ExitCode::from(1),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Failed(e.to_string())
    }
}

impl From<stackgame_core::Error> for CliError {
    fn from(e: stackgame_core::Error) -> Self {
        match e {
            stackgame_core::Error::Config(_) => Self::Usage(e.to_string()),
            _ => Self::Failed(e.to_string()),
        }
    }
}
