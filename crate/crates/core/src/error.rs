use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CpealError>;

#[derive(Debug, Error)]
pub enum CpealError {
    /// Input violates a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A CPEB or checkpoint file does not follow the expected layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("selection error: {0}")]
    Selection(String),

    /// Experiment configuration is malformed or infeasible.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CpealError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        CpealError::Validation(msg.into())
    }

    pub(crate) fn selection(msg: impl Into<String>) -> Self {
        CpealError::Selection(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CpealError::Config(msg.into())
    }

    /// True for errors caused by user input (bad flags, config, files that
    /// fail validation), as opposed to failures while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            CpealError::Validation(_) | CpealError::Config(_) | CpealError::Format(_)
        )
    }
}
