use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("block layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value {value} at index {index} lies outside the box [{lower}, {upper}]")]
    OutOfBox {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("least-squares fit is rank deficient: {0}")]
    RankDeficient(String),

    #[error("unsupported quadrature order {0} (supported: 1..=32)")]
    UnsupportedOrder(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("inner solve failed for agent {agent} at state {state}: {reason}")]
    InnerSolve {
        agent: usize,
        state: usize,
        reason: String,
    },

    #[error("scalar root bracket not found: {0}")]
    Bracket(String),

    #[error("no active firm in the static market equilibrium")]
    NoActiveFirm,

    #[error("static equilibrium did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("algorithm `{algorithm}` is not available for model `{model}`")]
    Unsupported { algorithm: String, model: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
