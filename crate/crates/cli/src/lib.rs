//! Batch scenario runner and mask utilities behind the `studio` binary.
//!
//! Exit codes are a stable contract: 0 success, 1 usage error,
//! 2 scenario or validation failure, 3 backend or storage failure.

pub mod preview;
pub mod report;
pub mod runner;

use studio_core::orchestrator::{ErrorKind, OrchestratorError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

/// Exit code for a failed pipeline call.
pub fn exit_code_for(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::BackendUnavailable | ErrorKind::Storage => 3,
        _ => 2,
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match exit_code_for(e.kind()) {
            3 => CliError::Backend(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}
