use std::path::PathBuf;

use thiserror::Error;

use crate::inference::FittedModel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("schema violation in task {task}, record {record}: {message}")]
    Schema {
        task: usize,
        record: usize,
        message: String,
    },

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("point {record} of task {task} lies outside the domain")]
    OutsideDomain { task: usize, record: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("task index {index} out of range (I = {count})")]
    TaskIndex { index: usize, count: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mask for task {0} is not contained in the domain")]
    MaskOutsideDomain(usize),

    #[error("cannot place {count} masks: only {available} cells / {tasks} tasks available")]
    InfeasibleMasks {
        count: usize,
        available: usize,
        tasks: usize,
    },

    #[error("Cholesky factorization failed even with jitter {jitter:e}")]
    Cholesky { jitter: f64 },

    #[error("fit diverged at sweep {sweep}: {reason}")]
    Diverged {
        sweep: usize,
        reason: String,
        last: Option<Box<FittedModel>>,
    },

    #[error("checkpoint format '{found}' is not supported (expected '{expected}')")]
    CheckpointVersion { found: String, expected: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Cholesky { .. } | Error::Diverged { .. })
    }
}
