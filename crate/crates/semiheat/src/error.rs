use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel is not symmetric: |k[{x}][{y}] - k[{y}][{x}]| = {dev:e}")]
    AsymmetricKernel { x: usize, y: usize, dev: f64 },

    #[error("kernel row {x} sums to {sum}, expected 1 within 1e-12")]
    NotMarkov { x: usize, sum: f64 },

    #[error("vertex {x} has non-positive {what}: {value}")]
    NonPositive { x: usize, what: &'static str, value: f64 },

    #[error("negative noise weight {value} at vertex {x}")]
    NegativeWeight { x: usize, value: f64 },

    #[error("graph is disconnected ({reached} of {n} vertices reachable from 0)")]
    Disconnected { reached: usize, n: usize },

    #[error("measure is not proportional to mass; L is not self-adjoint in the mu-weighted inner product (ratio spread {spread:e})")]
    NotSelfAdjoint { spread: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("scalar function produced a non-finite value at lambda = {lambda}")]
    NonFiniteFilter { lambda: f64 },

    #[error("empty quadrature grid")]
    EmptyQuadrature,

    #[error("time grid error: {0}")]
    BadTimeGrid(String),

    #[error("graph too large for dense kernel computation: n = {n} > limit {limit}")]
    TooLargeForDense { n: usize, limit: usize },

    #[error("graph too large for the spectral tensor oracle: n = {n} > limit {limit}")]
    TooLargeForOracle { n: usize, limit: usize },

    #[error("unknown generator spec '{0}'")]
    BadGeneratorSpec(String),

    #[error("graph file error: {0}")]
    BadGraphFile(String),

    #[error("solver aborted: {0}")]
    SolverAbort(String),
}

pub type Result<T> = std::result::Result<T, Error>;
