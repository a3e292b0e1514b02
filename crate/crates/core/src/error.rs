use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),

    /// The calibrated blanket probability is not a probability, or the
    /// mechanism is otherwise undefined for the requested budget.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("malformed message: {0}")]
    MalformedMessage(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient trials: {0}")]
    InsufficientTrials(String),
}
