//! Error types shared across the crate.
//!
//! Every fallible operation returns [`Error`]. The variants map onto the
//! process exit codes used by the CLI: parse errors (3), validation errors
//! (4) and resource-limit errors (5).

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A file could not be parsed. Carries the 1-based line and column of
    /// the offending token where known.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },

    /// Structurally well-formed input that violates a semantic requirement
    /// (bad state index, cyclic network, mismatched table, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A computation would exceed a configured resource limit.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for a parse error without a meaningful column.
    pub fn parse_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            col: 1,
            msg: msg.into(),
        }
    }

    /// Shorthand for a validation error.
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Shorthand for a resource error.
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
