use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,

    #[error("{path}: {message}")]
    Dataset { path: PathBuf, message: String },

    #[error("record {index}: {message}")]
    Record { index: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ged must be non-negative and finite, got {0}")]
    NegativeGed(f64),

    #[error(
        "exact GED budget of {budget} expanded states exhausted (best lower bound {lower_bound})"
    )]
    BudgetExhausted { budget: u64, lower_bound: f64 },

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("mutation failed: {0}")]
    Mutation(String),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("backward requires a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}, batch {batch} (pair {pair}): loss {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        pair: usize,
        loss: f64,
    },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
