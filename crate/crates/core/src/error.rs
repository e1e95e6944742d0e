//! Error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("oracle lacks capability: {0}")]
    CapabilityMissing(&'static str),
    #[error("proximal subproblem is unbounded below: {0}")]
    ProxDiverged(String),
    #[error("inner solver failed: {0}")]
    InnerSolverFailed(String),
    #[error("unknown zoo entry: {0}")]
    UnknownName(String),
    #[error("no analytic form: {0}")]
    NoAnalyticForm(String),
    #[error("base point is infeasible (function value is +inf)")]
    BasePointInfeasible,
    #[error("point outside the domain: {0}")]
    OutOfDomain(String),
    #[error("not a subgradient: {0}")]
    NotASubgradient(String),
    #[error("point is not on the graph: {0}")]
    PointNotOnGraph(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate box: {0}")]
    DegenerateBox(String),
    #[error("invalid piecewise function: {0}")]
    InvalidPiecewise(String),
    #[error("spec parse error: {0}")]
    SpecParse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
