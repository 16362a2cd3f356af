use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid rational `{0}`")]
    InvalidRational(String),

    #[error("value {0} lies outside [0, 1]")]
    OutOfUnitInterval(String),

    #[error("dyadic {k}/2^{level} is not representable")]
    InvalidDyadic { k: u64, level: u32 },

    #[error("action {action} is not feasible at state {state}")]
    InfeasibleAction { state: String, action: String },

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("expansion truncated at {available} bits, need {needed} for the requested tolerance")]
    InsufficientDepth { available: usize, needed: usize },

    #[error("arithmetic overflow while forming {0}")]
    Overflow(String),

    #[error("value iteration did not converge: delta {delta:e} after {iterations} sweeps")]
    NotConverged { iterations: usize, delta: f64 },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}
