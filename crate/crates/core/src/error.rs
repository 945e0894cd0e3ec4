use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are individually valid but do not fit together (grid mismatch etc.).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    /// Probability reached the periodic boundary of the grid.
    #[error("boundary contamination at step {step}: tail {tail:.3e} exceeds {threshold:.3e}")]
    BoundaryContamination {
        step: usize,
        tail: f64,
        threshold: f64,
    },

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("engine `{engine}`: {source}")]
    Engine {
        engine: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_engine(self, engine: &'static str) -> Self {
        Error::Engine {
            engine,
            source: Box::new(self),
        }
    }

    /// True for errors caused by the user's inputs rather than by a run going wrong.
    pub fn is_configuration(&self) -> bool {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Parse { .. } | Error::Validation { .. } => {
                true
            }
            Error::Realization { source, .. } | Error::Engine { source, .. } => {
                source.is_configuration()
            }
            _ => false,
        }
    }
}
