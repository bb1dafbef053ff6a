use std::path::PathBuf;

use thiserror::Error;

use crate::model::SignalVector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller did not meet a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A model object failed its construction invariants.
    #[error("invalid model: {0}")]
    Invalid(String),

    #[error("{count} assignments exceed the enumeration cap of {cap}; use branch-and-bound mode")]
    TooManyAssignments { count: u128, cap: u128 },

    /// An iterative solver stopped before meeting its tolerance. The best
    /// feasible point seen so far is attached when one exists.
    #[error("solver hit its iteration limit ({iterations} iterations)")]
    IterationLimit {
        iterations: usize,
        incumbent: Option<(SignalVector, f64)>,
    },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than a failing solver.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::IterationLimit { .. } | Error::Lp(_))
    }
}
