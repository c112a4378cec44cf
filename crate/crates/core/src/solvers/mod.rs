//! Descent solvers for non-negative least squares with optional
//! sparsity promotion.
//!
//! Three iterations are provided: a multiplicative-direction residual
//! norm descent with a closed-form step ([`mrnsd`]), a variant that
//! soft-thresholds each update to drive entries to exact zero
//! ([`sp_mrnsd`]), and a mapped-variable gradient descent whose
//! reparameterization keeps iterates non-negative and absorbs zeros
//! ([`sp_nngd`]). All three share one scalar line search and report a
//! per-iteration trace.

mod descent;
mod line_search;
mod scalar;

pub use descent::{
    mrnsd, mrnsd_observed, mrnsd_optimal_alpha, sp_mrnsd, sp_mrnsd_observed, sp_nngd,
    sp_nngd_observed,
};
pub use line_search::{line_search_scalar, LineSearchOptions};
pub use scalar::{
    mrnsd_step_bound, soft_threshold, soft_threshold_scalar, spmrnsd_step_bound, MappingParams,
};

use thiserror::Error;

use crate::linop::OpError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("operator is {rows}x{cols} but the right-hand side has length {rhs}")]
    RhsLength {
        rows: usize,
        cols: usize,
        rhs: usize,
    },
    #[error("initial point has length {got}, expected {expected}")]
    InitLength { expected: usize, got: usize },
    #[error("initial point must be strictly positive, entry {index} is {value}")]
    NonPositiveInit { index: usize, value: f64 },
    #[error("initial point for the mapped solver must be non-negative and finite, entry {index} is {value}")]
    InvalidMappedInit { index: usize, value: f64 },
    #[error("shrinkage weight must be non-negative and finite, got {0}")]
    InvalidShrinkage(f64),
    #[error("mapping steepness must be positive and finite, got {0}")]
    InvalidSteepness(f64),
    #[error("mapping switch point must be finite, got {0}")]
    InvalidSwitchPoint(f64),
    #[error("mapping only attains non-negative values, cannot invert {0}")]
    NegativeMappingTarget(f64),
    #[error("line search interval [{lo}, {hi}] is invalid")]
    BadInterval { lo: f64, hi: f64 },
    #[error("objective is not finite at step {alpha}")]
    NonFiniteObjective { alpha: f64 },
    #[error("line search needs an evaluation budget of at least 2, got {0}")]
    TooFewEvals(usize),
    #[error("direction and gradient lengths differ: {dir} vs {grad}")]
    MismatchedLengths { dir: usize, grad: usize },
    #[error("degenerate direction: the operator annihilates it")]
    DegenerateDirection,
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Op(#[from] OpError),
}

/// Starting point for a solver run, interpreted in solution space.
#[derive(Clone, Debug)]
pub enum Init {
    /// Every entry set to one value.
    Constant(f64),
    /// An explicit vector, which must match the solution length.
    Vector(Vec<f64>),
}

/// Shared solver settings.
#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Iteration budget; the solvers run it fully unless the gradient
    /// vanishes, the direction dies, or the early-stop rule fires.
    pub max_iters: usize,
    /// Early stop when the relative residual changes by less than this
    /// between consecutive iterations. Zero (the default) disables the
    /// rule so all iterations run.
    pub rel_change_tol: f64,
    pub init: Init,
    pub line_search: LineSearchOptions,
    /// Whether to keep per-iteration records in the result.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 100,
            rel_change_tol: 0.0,
            init: Init::Constant(0.1),
            line_search: LineSearchOptions::default(),
            record_trace: true,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<(), SolverError> {
        if self.max_iters < 1 {
            return Err(SolverError::InvalidOptions(
                "iteration budget must be at least 1".into(),
            ));
        }
        if !(self.rel_change_tol.is_finite() && self.rel_change_tol >= 0.0) {
            return Err(SolverError::InvalidOptions(format!(
                "early-stop tolerance must be non-negative, got {}",
                self.rel_change_tol
            )));
        }
        Ok(())
    }
}

/// One iteration of a solver trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iter: usize,
    /// `||A x - b||` after the update.
    pub residual_norm: f64,
    /// `residual_norm / ||b||`, or the absolute norm when `b` is zero.
    pub rel_residual: f64,
    /// Fraction of solution entries that are not exactly zero.
    pub sparsity_proxy: f64,
    /// Accepted step length.
    pub step_size: f64,
}

/// Outcome of a solver run. The solution is non-negative entry-wise;
/// the trace holds one record per completed iteration when recording is
/// enabled.
#[derive(Clone, Debug)]
pub struct SolverResult {
    pub solution: Vec<f64>,
    pub iterations_run: usize,
    pub trace: Vec<IterationRecord>,
}
