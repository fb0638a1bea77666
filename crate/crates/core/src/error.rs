use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the overlapscope library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsatisfiable balance: {0}")]
    UnsatisfiableBalance(String),

    #[error("ROC curve undefined: {0}")]
    UndefinedRoc(String),

    #[error("threshold undefined: {0}")]
    UndefinedThreshold(String),

    #[error("training failed at epoch {epoch}: {reason}")]
    TrainingFailure { epoch: usize, reason: String },

    #[error("failed to load {path}: {reason}")]
    Load { path: PathBuf, reason: String },

    #[error("image format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable identifier for the error category, used in machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDesign(_) => "invalid-design",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::UnsatisfiableBalance(_) => "unsatisfiable-balance",
            Error::UndefinedRoc(_) => "undefined-roc",
            Error::UndefinedThreshold(_) => "undefined-threshold",
            Error::TrainingFailure { .. } => "training-failure",
            Error::Load { .. } => "load",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
