//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by table construction, fitting, inference and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric input is outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A simulator produced a non-finite state.
    #[error("simulation failure: {0}")]
    SimulationFailure(String),

    /// A fit was requested on fewer rows than the minimum fit size.
    #[error("too few samples: {0}")]
    TooFewSamples(String),

    /// A table cannot be used for inference (e.g. every column is constant).
    #[error("unusable table: {0}")]
    UnusableTable(String),

    /// A file could not be parsed; carries the location of the problem.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A file has the wrong structure (bad magic, inconsistent dimensions, ...).
    #[error("format error: {0}")]
    Format(String),

    /// An experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
