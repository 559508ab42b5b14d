use std::io;

use thiserror::Error;

/// Everything a command can fail with. Each variant maps to one process exit
/// code.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Model(#[from] edfluid_core::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("verdict failed: {0}")]
    VerdictFailed(String),
}

impl AppError {
    /// 2 for bad input, 3 for failures during a run, 4 for failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Model(e) if e.is_configuration_error() => 2,
            AppError::Model(_) | AppError::Io(_) => 3,
            AppError::VerdictFailed(_) => 4,
        }
    }

    /// Name of the underlying core error variant, if any.
    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Config(_) => "ConfigError",
            AppError::Model(e) => match e {
                edfluid_core::Error::InvalidParameter(_) => "InvalidParameter",
                edfluid_core::Error::AssumptionViolation { .. } => "AssumptionViolation",
                edfluid_core::Error::QuadratureNonConvergence { .. } => "QuadratureNonConvergence",
                edfluid_core::Error::BracketNotFound { .. } => "BracketNotFound",
                edfluid_core::Error::RootNotFound(_) => "RootNotFound",
                edfluid_core::Error::RegimeError(_) => "RegimeError",
                edfluid_core::Error::GridMismatch(_) => "GridMismatch",
                edfluid_core::Error::EventOverflow { .. } => "EventOverflow",
                edfluid_core::Error::EmptyInitialMeasure => "EmptyInitialMeasure",
            },
            AppError::Io(_) => "IoError",
            AppError::VerdictFailed(_) => "VerdictFailed",
        }
    }
}
