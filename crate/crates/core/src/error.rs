use thiserror::Error;

/// Errors produced by the simulator, the protocol engine and the runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExamError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A state vector lost its normalization or both projections vanished.
    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("resource pool exhausted: need {needed}, have {available}")]
    PoolExhausted { needed: usize, available: usize },

    #[error("insufficient surviving resources: {surviving} left after checks, need {required}")]
    InsufficientResources { surviving: usize, required: usize },

    #[error("round cap of {cap} exceeded")]
    RoundCapExceeded { cap: usize },

    #[error("qubit budget exceeded: {requested} qubits requested, cap is {cap}")]
    QubitBudget { requested: usize, cap: usize },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("transcript parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl ExamError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ExamError::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ExamError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for ExamError {
    fn from(err: std::io::Error) -> Self {
        ExamError::Io(err.to_string())
    }
}

pub type Result<T, E = ExamError> = std::result::Result<T, E>;
