use std::path::PathBuf;

use crate::grid::LinearSolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameters or configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Fields or operators that do not fit together.
    #[error("structure mismatch: {0}")]
    Structure(String),
    /// A value outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// NaN, breakdown or a failed factorization.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{what} did not converge: {report}")]
    NotConverged {
        what: String,
        report: LinearSolveReport,
    },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Structure(_) | Error::Domain(_) | Error::Degenerate(_) => 1,
            Error::Numerical(_) | Error::NotConverged { .. } => 2,
            Error::Io { .. } => 3,
        }
    }
}
