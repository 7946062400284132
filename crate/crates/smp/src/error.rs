//! Error type shared across the crate.
//!
//! Data-dependent failures (bad input files, infeasible sampling, diverging
//! training) are reported through [`Error`]. Violations of API contracts
//! (dimension mismatches, out-of-range indices passed by calling code) panic
//! with an assertion message instead.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{context}: expected {expected}, found {found}")]
    Mismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("cannot sample {needed} negative pairs: only {available} non-edges exist")]
    Negatives { needed: usize, available: usize },

    #[error("class {class} has {size} nodes, need at least {needed} for the requested split")]
    ClassTooSmall {
        class: u32,
        size: usize,
        needed: usize,
    },

    #[error("metric undefined: scores contain only one class")]
    SingleClass,

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("{what} is {actual}, which exceeds the limit {limit}")]
    Limit {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
