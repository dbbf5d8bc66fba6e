use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at node {node}{}", species.map(|s| format!(" (species {s})")).unwrap_or_default())]
    NonFinite { node: usize, species: Option<usize> },

    #[error("reaction overflow at node {node}, species {species}: {value}")]
    ReactionOverflow {
        node: usize,
        species: usize,
        value: f64,
    },

    #[error("zero pivot in tridiagonal solve at row {row}")]
    ZeroPivot { row: usize },

    #[error("exponential range exceeded: |k1 t| = {0} > 700")]
    ExponentialRange(f64),

    #[error("energy functional overflow: {0}")]
    EnergyOverflow(String),

    #[error("cutoff verification failed for function {index} at node {node}: |phi'| = {derivative}, bound = {bound}")]
    CutoffVerification {
        index: usize,
        node: usize,
        derivative: f64,
        bound: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
