//! Numerical engine for weighted L2 division of polynomial tuples and the
//! curvature machinery that certifies its bounds.
//!
//! Given holomorphic polynomial generators g_1, ..., g_p on a polydisc and a
//! target f, the division module produces h_1, ..., h_p with
//! f = sum_j h_j g_j and an explicit weighted L2 estimate. The supporting
//! modules verify the chain of inequalities the estimate rests on:
//!
//! * [`tensor`] - Cauchy-Schwarz inequalities for tensors and their wedge
//!   variant, with the unitary reduction relating the two.
//! * [`poly`] / [`bipoly`] - sparse multivariate polynomials and mixed
//!   polynomial expressions in (z, conj(z)) with exact Wirtinger derivatives.
//! * [`system`] - generator tuples: gradients, the complex Hessian of
//!   log |g|^2 along two independent routes, and the canonical solution datum
//!   used by the division bound.
//! * [`hermitian`] / [`bundle`] - Hermitian forms, curvature tensors of the
//!   kernel subbundle of (g_1, ..., g_p) along two independent routes,
//!   twisted-metric domination, and the fiberwise trace identities.
//! * [`quadrature`] - deterministic polydisc quadrature with divergence
//!   detection for the weighted integrals.
//! * [`division`] - the division solver itself plus its iterated form.
//!
//! Everything is deterministic: random sweeps are seeded, quadrature sums run
//! in a fixed order with compensated accumulation, and reports depend only on
//! inputs and seeds.

pub mod bipoly;
pub mod bundle;
pub mod division;
pub mod error;
pub mod hermitian;
pub mod poly;
pub mod quadrature;
pub mod random;
pub mod system;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Central tolerance constants. Every check reports the tolerance it used;
/// keeping them in one table makes the reports and the tests agree by
/// construction.
pub mod tol {
    /// Absolute slack allowed in Cauchy-Schwarz checks.
    pub const CS_ABS: f64 = 1e-12;
    /// Relative slack (times factor * rhs) allowed in Cauchy-Schwarz checks.
    pub const CS_REL: f64 = 1e-12;
    /// Relative agreement required between the two log-Hessian routes.
    pub const LOG_HESSIAN_ROUTES_REL: f64 = 1e-11;
    /// Relative agreement required between the two curvature routes.
    pub const CURVATURE_ROUTES_REL: f64 = 1e-9;
    /// Relative agreement for the wedge-to-tensor round trip.
    pub const WEDGE_REDUCTION_REL: f64 = 1e-12;
    /// Permitted negativity of eigenvalues, times a scale, in PSD checks of
    /// exact difference forms.
    pub const PSD_FORM_REL: f64 = 1e-10;
    /// Permitted negativity for the twisted-domination form.
    pub const DOMINATION_REL: f64 = 1e-8;
    /// Max-entry residual allowed in the trace identity for the solution datum.
    pub const TRACE_IDENTITY_ABS: f64 = 1e-10;
    /// Kernel-constraint residual allowed on curvature inputs.
    pub const KERNEL_CONSTRAINT_ABS: f64 = 1e-10;
    /// Contraction residual allowed for the solution datum and syzygies.
    pub const CONTRACTION_ABS: f64 = 1e-12;
    /// Eigenvalue threshold (times the largest eigenvalue) below which a
    /// direction counts as null for ranks, pseudo-inverses and traces.
    pub const EIGEN_NULL_REL: f64 = 1e-8;
    /// |g|^2 floor under which a quadrature node is treated as singular.
    pub const NODE_FLOOR: f64 = 1e-14;
    /// Growth factor over one grid doubling that flags a power divergence.
    pub const DIVERGENCE_GROWTH: f64 = 1.5;
    /// Increment decay ratio above which refinement increments flag a slow
    /// (logarithmic) divergence.
    pub const DIVERGENCE_INCREMENT_RATIO: f64 = 0.7;
    /// Significance floor for refinement increments, times (1 + |value|).
    pub const DIVERGENCE_SIGNIFICANCE: f64 = 1e-9;
    /// Relative pivot threshold for rank decisions in least-squares solves.
    pub const PIVOT_REL: f64 = 1e-10;
    /// Pencil eigenvalue above which a syzygy direction counts as divergent
    /// under grid doubling.
    pub const GRAM_GROWTH_PENCIL: f64 = 0.02;
    /// Diagonal Gram blow-up ratio used as a fast pre-filter for divergent
    /// syzygy directions.
    pub const GRAM_DIAGONAL_BLOWUP: f64 = 1e12;
    /// Coefficient-level residual (relative to coefficient scale) allowed for
    /// exact polynomial identities in the division module.
    pub const DIVISION_RESIDUAL_REL: f64 = 1e-10;
    /// Projected-gradient scale for the minimizer optimality check.
    pub const OPTIMALITY_REL: f64 = 1e-8;
    /// Pointwise minimality slack, times the local scale.
    pub const POINTWISE_MIN_REL: f64 = 1e-9;
}

/// Convenience: relative difference |a - b| / max(|a|, |b|, floor).
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(1e-300);
    (a - b).abs() / scale
}

/// Relative difference for complex values.
pub fn rel_diff_c(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm()).max(1e-300);
    (a - b).norm() / scale
}
