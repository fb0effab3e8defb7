use std::path::PathBuf;

use crate::solvers::SolveReport;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parameter regime: {0}")]
    Regime(String),

    #[error("{solver} did not converge after {iterations} iterations (last change {last_change:e})")]
    NotConverged {
        solver: String,
        iterations: usize,
        last_change: f64,
        report: Option<Box<SolveReport>>,
    },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate design: {0}")]
    Degenerate(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("params hash mismatch: expected {expected}, found {found}")]
    Integrity { expected: String, found: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed artifact {path}: {msg}")]
    Artifact { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn artifact(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Artifact {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
