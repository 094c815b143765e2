use std::process::ExitCode;

use relbel_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Conflict(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Conflict(_) => 4,
        })
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NonConvergence { .. }
            | CoreError::RankDeficient { .. }
            | CoreError::NotPositiveDefinite(_)
            | CoreError::UndefinedEvidence { .. } => CliError::Numerical(e.to_string()),
            CoreError::Io(io) => CliError::Io(io),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}
