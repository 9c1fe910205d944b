use thiserror::Error;

/// Errors produced anywhere in the design engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AredError {
    #[error("variable `{name}` has a degenerate range [{low}, {high}]")]
    DegenerateRange { name: String, low: f64, high: f64 },

    #[error("domain has no independent variables")]
    EmptyDomain,

    #[error("coordinate {index} = {value} lies outside [{low}, {high}]")]
    OutOfDomain {
        index: usize,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("draw exhausted after {attempts} attempts")]
    DrawExhausted { attempts: usize },

    #[error("archive is empty")]
    EmptyArchive,

    #[error("need at least {needed} measured samples, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("SMO solver did not reach KKT tolerance within {iterations} iterations")]
    SolverDiverged { iterations: usize },

    #[error("series lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("initial samples do not cover the domain corner {corner:?}")]
    MissingEndpoints { corner: Vec<f64> },

    #[error("initial sample {index} has no measured value")]
    UnmeasuredInitialSample { index: usize },

    #[error("operation `{operation}` is not allowed while the session is {status}")]
    WrongState {
        operation: &'static str,
        status: String,
    },

    #[error("sample {index} has no measured value")]
    UnmeasuredSample { index: usize },

    #[error("measured value {0} is not finite")]
    NonFiniteValue(f64),

    #[error("session has not converged; pass force to export anyway")]
    NotConverged,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o failure: {0}")]
    Io(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaMismatch { found: u32, expected: u32 },

    #[error("corrupt document: {0}")]
    CorruptDocument(String),
}

pub type Result<T, E = AredError> = std::result::Result<T, E>;

impl From<std::io::Error> for AredError {
    fn from(err: std::io::Error) -> Self {
        AredError::Io(err.to_string())
    }
}

impl From<csv::Error> for AredError {
    fn from(err: csv::Error) -> Self {
        AredError::Io(err.to_string())
    }
}
