use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("composition mismatch: {0}")]
    Composition(String),

    #[error("joint of {cells} cells exceeds the limit of {limit}")]
    CellLimit { cells: u128, limit: usize },

    /// The coupling violates `I(V1;Y) >= I(U1;SA|SB)`; `margin` is the (negative) slack in bits.
    #[error("coupling is infeasible: I(V1;Y) - I(U1;SA|SB) = {margin:.6} bits")]
    Infeasible { margin: f64 },

    #[error("precondition failed for {leg}: {reason}")]
    Precondition { leg: String, reason: String },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("memory cap exceeded: {needed} symbols needed, cap is {cap}")]
    MemoryCap { needed: u128, cap: usize },

    #[error("linear program failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
