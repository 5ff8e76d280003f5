use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied parameters (distribution shapes, budgets, ranges, config keys).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("schema version mismatch in {path}: found {found}, expected {expected}")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    /// A persisted record parsed fine but breaks a domain invariant.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Caller broke an operation precondition (shape mismatch, oversized oracle input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric failure at round {round}: {message}")]
    Numeric { round: usize, message: String },

    #[error("arm `{arm}` (seed {seed}) failed: {source}")]
    Arm {
        arm: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end: 1 for configuration
    /// problems detected before any work starts, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Malformed { .. }
            | Error::SchemaVersion { .. }
            | Error::Invariant(_) => 1,
            Error::Arm { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
