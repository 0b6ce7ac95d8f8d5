use thiserror::Error;

/// Failure modes of the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample {value} at x = {x}")]
    NonFiniteSample { x: f64, value: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model rejected: {0}")]
    InvalidModel(String),

    #[error("kernel cutoff {needed} exceeds the limit of {limit} cells")]
    KernelCutoff { needed: usize, limit: usize },

    #[error("critical-point bisection did not converge on [{lo}, {hi}] within {iterations} iterations")]
    BisectionFailed { lo: f64, hi: f64, iterations: usize },

    #[error("time step underflow (dt = {dt:e}) at step {step}")]
    TimeStepUnderflow { dt: f64, step: usize },

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("mollifier width {width} is below the cell size {dx}")]
    MollifierTooNarrow { width: f64, dx: f64 },

    #[error("Picard iteration stalled at step {step}: residual {residual:e} after {iterations} iterations")]
    PicardStalled { step: usize, residual: f64, iterations: usize },

    #[error("tridiagonal system is singular at row {row}")]
    SingularSystem { row: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
