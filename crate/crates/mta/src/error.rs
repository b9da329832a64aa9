//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T, E = MtaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MtaError {
    #[error("invalid similarity entry at ({row}, {col}): {value} (entries must be finite and non-negative)")]
    InvalidSimilarity { row: usize, col: usize, value: f64 },

    #[error("invalid covariance entry at index {index}: {value} (entries must be finite and strictly positive)")]
    InvalidCovariance { index: usize, value: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("task list is empty")]
    EmptyTasks,

    #[error("task {id:?} has no samples")]
    EmptyTask { id: String },

    #[error("task {id:?} sample {index} is not finite")]
    NonFiniteSample { id: String, index: usize },

    #[error("task {id:?} has {got} samples but at least {needed} are required")]
    InsufficientSamples {
        id: String,
        needed: usize,
        got: usize,
    },

    #[error("lambda must lie in (0, 1], got {value}")]
    LambdaOutOfRange { value: f64 },

    #[error("invalid argument {what}: {value}")]
    InvalidArgument { what: &'static str, value: f64 },

    #[error("constraint violated: {constraint} ({detail})")]
    ConstraintViolation {
        constraint: &'static str,
        detail: String,
    },

    #[error("unknown estimator {name:?}")]
    UnknownEstimator { name: String },

    #[error("unknown similarity mode {name:?}")]
    UnknownMode { name: String },

    #[error("held-out point {index} of task {task:?} is not a member of the evaluation grid")]
    GridMembership { task: String, index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{file}:{line}: field {field:?}: {message}")]
    Parse {
        file: String,
        line: usize,
        field: String,
        message: String,
    },

    #[error("I/O error on {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },

    /// A violated internal invariant (solver failure on valid input,
    /// cross-check disagreement, non-finite intermediate). Never caused by
    /// bad user input.
    #[error("internal invariant violation: {0}")]
    Internal(String),
}

impl MtaError {
    /// True for errors that indicate a bug in this crate rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, MtaError::Internal(_))
    }
}
