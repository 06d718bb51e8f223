use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced to the command line, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },

    #[error("unknown model preset `{0}`")]
    UnknownPreset(String),

    #[error("cannot write {path}: {reason}")]
    Output { path: PathBuf, reason: String },

    #[error("invalid parameters: {0}")]
    Invalid(String),

    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Config { .. } => 3,
            CliError::UnknownPreset(_) => 4,
            CliError::Output { .. } => 5,
            CliError::Invalid(_) => 6,
        }
    }

    pub fn output(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.into(),
            reason: err.to_string(),
        }
    }
}

impl From<kvlink_core::Error> for CliError {
    fn from(e: kvlink_core::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
