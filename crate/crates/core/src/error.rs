use thiserror::Error;

use crate::data::LmmParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a numerical routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data that violates a structural invariant (too few subjects, no replicates, ...).
    #[error("invalid data: {0}")]
    Validation(String),

    /// Data for which the generalized pivots are undefined (e.g. zero within-subject variation).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("optimizer did not converge after {iterations} iterations (best so far: {best:?})")]
    NotConverged { iterations: usize, best: LmmParams },

    /// An internal numerical invariant was violated.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    /// Every invalid field of a simulation config, one message each.
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit status for this error: 2 usage or parse, 3 unusable data,
    /// 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Parse { .. } | Error::Config(_) | Error::Io(_) => 2,
            Error::Validation(_) | Error::Degenerate(_) => 3,
            Error::NotConverged { .. } | Error::Numerical(_) => 4,
        }
    }
}
