use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong between reading inputs and writing reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {source_name}: {message}")]
    Parse {
        source_name: String,
        message: String,
    },

    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("no {0} available in catalog")]
    MissingProduct(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("inconsistent input lengths: {0}")]
    Shape(String),

    #[error("dispatch infeasible: {0}")]
    Infeasible(String),

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI. Configuration problems, input data
    /// problems and internal invariant failures each get their own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::MissingProduct(_)
            | Error::Config(_) => 2,
            Error::Ingestion { .. } | Error::Shape(_) => 3,
            Error::Infeasible(_) | Error::ResourceGuard(_) | Error::Invariant(_) => 4,
            Error::Io { .. } => 5,
        }
    }
}
