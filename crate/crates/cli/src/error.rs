use std::fmt;

use crate::bankfile::BankFileError;

/// Run failure classes; each maps to one process exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),

    #[error("cannot load bank: {0}")]
    Bank(#[from] BankFileError),

    #[error("computation failed: {0}")]
    Solver(String),

    #[error("invariant checks failed:\n  {}", .0.join("\n  "))]
    Invariant(Vec<String>),

    #[error("io: {0}")]
    Io(String),
}

impl RunError {
    pub fn schema(msg: impl fmt::Display) -> Self {
        RunError::Schema(vec![msg.to_string()])
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Schema(_) | RunError::Bank(_) => 2,
            RunError::Solver(_) | RunError::Io(_) => 3,
            RunError::Invariant(_) => 4,
        }
    }
}

impl From<dielq_core::Error> for RunError {
    fn from(e: dielq_core::Error) -> Self {
        RunError::Solver(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}
