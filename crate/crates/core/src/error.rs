use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({u}, {v}) has invalid weight {weight}")]
    InvalidWeight { u: usize, v: usize, weight: f64 },
    #[error("adjacency matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid indicator matrix: {0}")]
    InvalidIndicator(String),
    #[error("oracle is not exact; use the robust variant")]
    InexactOracle,
    #[error("no convergence after {0} rounds")]
    NonConvergence(usize),
    #[error("eigensolver did not converge")]
    EigenFailure,
    #[error("dominant eigenvalue is not simple (gap {0:e})")]
    DegenerateDominant(f64),
    #[error("matrix is zero")]
    ZeroMatrix,
    #[error("graph too large for exhaustive search ({0} nodes)")]
    TooLarge(usize),
    #[error("minimal equitable partitions are not nested; coarsest partition is not unique")]
    CepNotUnique,
    #[error("invalid planted spec: {0}")]
    InvalidSpec(String),
    #[error("generator exhausted: {0}")]
    GeneratorExhausted(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
