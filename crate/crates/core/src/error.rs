use thiserror::Error;

/// Errors raised while building graphs, functions and problem instances.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("edge ({from}, {to}) is a self-loop")]
    SelfLoop { from: usize, to: usize },
    #[error("edge ({from}, {to}) appears more than once")]
    DuplicateEdge { from: usize, to: usize },
    #[error("edge ({from}, {to}) references a node outside 0..{node_count}")]
    EndpointOutOfRange {
        from: usize,
        to: usize,
        node_count: usize,
    },
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("edge index {0} out of range")]
    EdgeOutOfRange(usize),
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("proximal weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("initial masses sum to {actual:?}, expected {expected:?}")]
    InitialMassMismatch {
        expected: Vec<f64>,
        actual: Vec<f64>,
    },
    #[error("known optimum fails the KKT check (residual {0:e})")]
    KktResidual(f64),
    #[error("reference solver did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("degenerate random draw persisted after {0} attempts")]
    DegenerateDraw(usize),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// Violations of the protocol's preconditions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("node index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("edge index {0} out of range")]
    EdgeOutOfRange(usize),
    #[error("node {node} has non-positive mass s = {s:e}")]
    NonPositiveMass { node: usize, s: f64 },
    #[error("split requires an empty virtual index (s_r = {0:e})")]
    VirtualIndexOccupied(f64),
    #[error("combine requires a non-empty virtual index (s_r = {0:e})")]
    VirtualIndexEmpty(f64),
    #[error("split amount {amount} outside [0, {available}]")]
    SplitOutOfRange { amount: f64, available: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}
