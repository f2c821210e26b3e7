use thiserror::Error;

/// Errors produced anywhere in the forecasting pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input value is outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural invariant of a model or data type is violated.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    /// A numerical integration produced a non-finite state.
    #[error("integration diverged at step {step}")]
    IntegrationDiverged { step: usize },

    /// A covariance matrix has an eigenvalue below the PSD tolerance.
    #[error("covariance not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    /// A covariance or gain computation received non-finite values.
    #[error("non-finite covariance")]
    NonFinite,

    /// The innovation covariance could not be inverted.
    #[error("singular innovation covariance")]
    SingularInnovation,

    /// A filter produced a non-finite state.
    #[error("filter diverged at step {step}")]
    FilterDiverged {
        step: usize,
        /// Last finite belief mean before divergence.
        last_mean: Vec<f64>,
    },

    /// Too few eligible library vectors for a neighbor query.
    #[error("need {needed} neighbors but only {available} library vectors are eligible")]
    InsufficientNeighbors { needed: usize, available: usize },

    /// A series is too short for the requested embedding.
    #[error("series of length {len} too short: need at least {min} samples")]
    SeriesTooShort { len: usize, min: usize },

    /// A hybrid replacement requires an observation that does not exist.
    #[error("state variable {index} cannot be replaced: replaced variables must be directly observed")]
    Unobserved { index: usize },

    /// Invalid configuration; lists every offending key.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    /// Malformed tabular input.
    #[error("parse error: {0}")]
    Parse(String),

    /// Too many Monte Carlo realizations failed.
    #[error("{failed} of {total} realizations diverged in {cell}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        cell: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
