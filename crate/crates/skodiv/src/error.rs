use thiserror::Error;

/// Crate-wide error type. Numerical verdicts that are expected outcomes
/// (an inequality failing, a divergent integral) are data, not errors;
/// this enum covers contract violations and unusable inputs.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("variable index {axis} out of range for {nvars} variables")]
    AxisOutOfRange { axis: usize, nvars: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("generator system is identically zero")]
    ZeroSystem,

    #[error("generators vanish simultaneously at the evaluation point (|g|^2 = {gnorm2:.3e})")]
    Singularity { gnorm2: f64 },

    #[error("kernel bundle has rank zero (single generator)")]
    TrivialKernel,

    #[error("vector violates the kernel constraint: max |<g, v>| = {residual:.3e} exceeds {tolerance:.1e}")]
    KernelConstraint { residual: f64, tolerance: f64 },

    #[error("twist parameter {gamma} is below the generic rank bound q = {q}")]
    TwistBelowRank { gamma: f64, q: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("division is infeasible at the requested degree: residual {residual:.3e}")]
    Infeasible { residual: f64 },

    #[error("integral hypothesis failed: {name} diverges under grid refinement (last value {value:.6e})")]
    HypothesisFailed { name: String, value: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

pub type Result<T> = std::result::Result<T, Error>;
