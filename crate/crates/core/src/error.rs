//! Error type shared by every module of the harness.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A dataset file does not carry a required column.
    #[error("{path}: missing column `{column}`")]
    Schema { path: PathBuf, column: String },

    /// A single dataset row is malformed. `row` is 1-based and counts the header.
    #[error("{path}: row {row}: {message}")]
    Row {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("duplicate requirement id `{0}`")]
    DuplicateId(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("variation error: {0}")]
    Variation(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("lexicon error: no entry for class `{0}`")]
    Lexicon(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: usize, message: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    /// A statistical design is incomplete or infeasible.
    #[error("design error: {0}")]
    Design(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 config, 2 backend, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BackendUnavailable { .. } | Error::Protocol(_) => 2,
            Error::Io { .. } | Error::Csv(_) => 3,
            _ => 1,
        }
    }
}
