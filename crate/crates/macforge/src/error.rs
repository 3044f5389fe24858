use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto process exit codes
/// (config 2, checkpoint 3, simulation abort 4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("simulation aborted: event cap of {cap} exceeded (replication seed {rep_seed})")]
    SimAbort { cap: u64, rep_seed: u64 },

    #[error("training aborted: non-finite loss at step {step}; last good checkpoint written")]
    NonFiniteLoss { step: u64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI surface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Checkpoint(_) => 3,
            Error::SimAbort { .. } | Error::NonFiniteLoss { .. } => 4,
            Error::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
