//! Crate-wide error type.
//!
//! Errors are grouped by what the caller can do about them: `Io`/`Parse`
//! point at a file, `Structure` means shapes or manifests disagree,
//! `Degenerate` flags inputs the math cannot accept (zero rows, n < 2),
//! `Budget` covers selection-size misuse, `Domain` covers scalar
//! preconditions, and `Guard` is the combinatorial refusal of the
//! brute-force oracle.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: PathBuf,
        /// Human-readable position: "row 3", "byte offset 12", ...
        location: String,
        message: String,
    },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("budget error: {0}")]
    Budget(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("refusing combinatorial blow-up: {0}")]
    Guard(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(
        path: impl Into<PathBuf>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            location: location.into(),
            message: message.into(),
        }
    }

    /// True when the error stems from user-supplied input (files, flags)
    /// rather than an internal failure. The CLI maps these to exit code 2.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Structure(_)
                | Error::Degenerate(_)
                | Error::Budget(_)
                | Error::Domain(_)
                | Error::Guard(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
