use thiserror::Error;

use crate::mesh::Node;

/// Errors raised by grid construction, metric assembly, problem validation
/// and the iterative solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field has {got} values, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: Node, value: f64 },

    #[error("conformal factor must be positive, got {value} at node {node}")]
    NonPositiveFactor { node: Node, value: f64 },

    #[error("metric coefficient {name} must be positive, got {value} at node {node}")]
    NonPositiveCoefficient { name: &'static str, node: Node, value: f64 },

    #[error("target curvature must be negative, got K = {value} at node {node}")]
    NonNegativeCurvature { node: Node, value: f64 },

    #[error("background curvature must be negative on the boundary, got K0 = {value} at node {node}")]
    BoundaryCurvatureNotNegative { node: Node, value: f64 },

    #[error("target differs from background curvature inside the collar at node {node} (|K - K0| = {diff:e})")]
    CollarViolation { node: Node, diff: f64 },

    #[error("sigma must vanish on the boundary, got {value:e} at node {node}")]
    BoundaryNotZero { node: Node, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires an annulus grid")]
    RequiresAnnulus,

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("operator failed the self-adjointness probe (relative asymmetry {asymmetry:e})")]
    NotSelfAdjoint { asymmetry: f64 },

    #[error("operator is not positive definite (<Au, u> = {value:e})")]
    NotPositiveDefinite { value: f64 },

    #[error("line search failed after {halvings} halvings at iteration {iter}")]
    LineSearchFailed { iter: usize, halvings: usize },

    #[error("solve from seed {seed} did not converge (b_l2 = {b_l2:e})")]
    SeedNotConverged { seed: usize, b_l2: f64 },

    #[error("eigen iteration stagnated after {iterations} sweeps; residuals {residuals:?}")]
    EigenStagnation { iterations: usize, residuals: Vec<f64> },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
