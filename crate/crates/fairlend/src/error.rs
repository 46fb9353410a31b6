//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("score {score} outside valid range 1..={num_levels}")]
    ScoreOutOfRange { score: usize, num_levels: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("distribution length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error(
        "instance too large for exhaustive enumeration: \
         num_levels {num_levels} (max {max_levels}), horizon {horizon} (max {max_horizon})"
    )]
    EnumerationCapacity {
        num_levels: usize,
        horizon: usize,
        max_levels: usize,
        max_horizon: usize,
    },

    #[error("batch contains no records for group {0}")]
    MissingGroup(&'static str),

    #[error("non-finite value in objective term {term}: {value}")]
    NonFiniteObjective { term: &'static str, value: f64 },

    #[error("refusing to emit row {index}: non-finite value in column {column}")]
    NonFiniteMetric { index: usize, column: &'static str },

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Parse {
            what,
            detail: detail.into(),
        }
    }
}
