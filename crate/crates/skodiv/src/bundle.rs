//! Kernel subbundle of the generator map (v₁,…,v_p) ↦ Σ g_j·v_j: the
//! holomorphic pivot frame and its induced metric, Nakano curvature by two
//! independent routes (exact metric derivatives in an orthonormalized frame
//! vs. a closed-form squared magnitude), the twisted-curvature domination
//! bound, and the fiber-trace diagnostics consumed by the division bounds.

use num_complex::Complex64;

use crate::bipoly::BiPoly;
use crate::error::{Error, Result};
use crate::hermitian::{cholesky_lower, CMatrix, HermitianForm, NakanoTensor, PinvLimit};
use crate::poly::MultiPoly;
use crate::system::GeneratorSystem;
use crate::tensor::CTensor;
use crate::tol;

/// Which logarithmic weight variant a check or division run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// log(1 + |g|²) in place of log|g|².
    A,
    /// A user-supplied plurisubharmonic φ with ω = ∂∂̄φ.
    B,
    /// −log log(1/|g|²), defined where |g| < 1.
    C,
}

/// Holomorphic frame of the kernel subbundle around a point: one row per
/// non-pivot generator, each row a p-tuple of polynomials contracting to
/// zero against (g₁,…,g_p), plus the induced metric H_{jk̄} = ⟨e_j, e_k⟩.
#[derive(Debug, Clone)]
pub struct KernelFrame {
    pivot: usize,
    row_indices: Vec<usize>,
    rows: Vec<Vec<MultiPoly>>,
    metric: Vec<BiPoly>,
    dim: usize,
    nvars: usize,
}

impl KernelFrame {
    pub fn pivot(&self) -> usize {
        self.pivot
    }

    /// Fiber rank p − 1.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Original generator index carried by each frame row.
    pub fn row_indices(&self) -> &[usize] {
        &self.row_indices
    }

    pub fn rows(&self) -> &[Vec<MultiPoly>] {
        &self.rows
    }

    pub fn metric(&self, j: usize, k: usize) -> &BiPoly {
        &self.metric[j * self.dim + k]
    }

    /// Metric matrix H(z).
    pub fn metric_at(&self, z: &[Complex64]) -> CMatrix {
        CMatrix::from_fn(self.dim, self.dim, |j, k| self.metric(j, k).eval(z))
    }

    /// Frame rows evaluated at z, as a (p−1)×p matrix.
    pub fn rows_at(&self, z: &[Complex64]) -> CTensor {
        let p = self.rows.first().map(|r| r.len()).unwrap_or(0);
        CTensor::from_fn(self.dim, p, |j, m| self.rows[j][m].eval(z))
    }

    /// Ambient p×n tangent matrix Σ_j v_frame[j]·e_j(z).
    pub fn ambient_from_frame(&self, v_frame: &CTensor, z: &[Complex64]) -> Result<CTensor> {
        if v_frame.rows() != self.dim || v_frame.cols() != self.nvars {
            return Err(Error::ShapeMismatch(format!(
                "frame tangent must be {}x{}, got {}x{}",
                self.dim,
                self.nvars,
                v_frame.rows(),
                v_frame.cols()
            )));
        }
        let rows = self.rows_at(z);
        let p = rows.cols();
        let mut out = CTensor::zeros(p, self.nvars);
        for m in 0..p {
            for lam in 0..self.nvars {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..self.dim {
                    acc += v_frame.at(j, lam) * rows.at(j, m);
                }
                out.set(m, lam, acc);
            }
        }
        Ok(out)
    }

    /// Frame components of an ambient tangent matrix already satisfying the
    /// kernel constraint Σ_j g_j·v[j,λ] = 0.
    pub fn frame_from_ambient(
        &self,
        sys: &GeneratorSystem,
        v_ambient: &CTensor,
        z: &[Complex64],
    ) -> Result<CTensor> {
        check_kernel_constraint(sys, v_ambient, z)?;
        let g_pivot = sys.generator(self.pivot).eval(z);
        if g_pivot.norm() == 0.0 {
            return Err(Error::Singularity {
                gnorm2: sys.gnorm2(z),
            });
        }
        let mut out = CTensor::zeros(self.dim, self.nvars);
        for (row, &orig) in self.row_indices.iter().enumerate() {
            for lam in 0..self.nvars {
                out.set(row, lam, v_ambient.at(orig, lam) / g_pivot);
            }
        }
        Ok(out)
    }
}

/// Builds the kernel frame at z with the pivot chosen as the generator of
/// maximal magnitude there: row e_j = g_pivot·(unit at j) − g_j·(unit at
/// pivot) for j ≠ pivot, and metric H_{jk̄} = δ_{jk}|g_pivot|² + g_j·conj(g_k).
pub fn kernel_frame(sys: &GeneratorSystem, z: &[Complex64]) -> Result<KernelFrame> {
    let p = sys.len();
    if p < 2 {
        return Err(Error::TrivialKernel);
    }
    sys.require_nonsingular(z)?;
    let g = sys.eval_all(z);
    let pivot = (0..p)
        .max_by(|&a, &b| g[a].norm().partial_cmp(&g[b].norm()).unwrap())
        .unwrap();
    let nvars = sys.nvars();
    let row_indices: Vec<usize> = (0..p).filter(|&j| j != pivot).collect();
    let dim = p - 1;
    let mut rows = Vec::with_capacity(dim);
    for &j in &row_indices {
        let mut row = vec![MultiPoly::zero(nvars); p];
        row[j] = sys.generator(pivot).clone();
        row[pivot] = sys.generator(j).scale(Complex64::new(-1.0, 0.0));
        rows.push(row);
    }
    let pivot_norm = BiPoly::norm_sq(sys.generator(pivot));
    let mut metric = Vec::with_capacity(dim * dim);
    for &j in &row_indices {
        for &k in &row_indices {
            let mut h = BiPoly::from_pair(sys.generator(j), sys.generator(k))?;
            if j == k {
                h = h.add(&pivot_norm)?;
            }
            metric.push(h);
        }
    }
    Ok(KernelFrame {
        pivot,
        row_indices,
        rows,
        metric,
        dim,
        nvars,
    })
}

fn check_kernel_constraint(
    sys: &GeneratorSystem,
    v: &CTensor,
    z: &[Complex64],
) -> Result<()> {
    let g = sys.eval_all(z);
    if v.rows() != g.len() || v.cols() != sys.nvars() {
        return Err(Error::ShapeMismatch(format!(
            "ambient tangent must be {}x{}, got {}x{}",
            g.len(),
            sys.nvars(),
            v.rows(),
            v.cols()
        )));
    }
    let scale = (1.0 + v.max_norm()) * (1.0 + sys.gnorm2(z).sqrt());
    let tolerance = tol::KERNEL_CONSTRAINT_ABS * scale;
    let mut residual = 0.0f64;
    for lam in 0..sys.nvars() {
        let s: Complex64 = (0..g.len()).map(|j| g[j] * v.at(j, lam)).sum();
        residual = residual.max(s.norm());
    }
    if residual > tolerance {
        return Err(Error::KernelConstraint {
            residual,
            tolerance,
        });
    }
    Ok(())
}

/// Closed-form Nakano value on an ambient kernel tangent:
/// −(1/|g|⁶)·|Σ_{j,ℓ,λ} conj(g_ℓ)·(g_ℓ·∂λg_j − g_j·∂λg_ℓ)·v[j,λ]|².
pub fn nakano_form_kernel_closed(
    sys: &GeneratorSystem,
    z: &[Complex64],
    v_ambient: &CTensor,
) -> Result<f64> {
    let gnorm2 = sys.require_nonsingular(z)?;
    check_kernel_constraint(sys, v_ambient, z)?;
    let g = sys.eval_all(z);
    let grad = sys.grad_matrix(z);
    let p = sys.len();
    let n = sys.nvars();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..p {
        for l in 0..p {
            for lam in 0..n {
                let wedge = g[l] * grad.at(j, lam) - g[j] * grad.at(l, lam);
                acc += g[l].conj() * wedge * v_ambient.at(j, lam);
            }
        }
    }
    Ok(-acc.norm_sqr() / (gnorm2 * gnorm2 * gnorm2))
}

/// Curvature data of the kernel bundle at a point: the frame, the lower
/// Cholesky factor L of the metric there (so Lᵀ maps pivot-frame tangents
/// to orthonormal-frame tangents), and the curvature tensor in the
/// orthonormalized frame.
#[derive(Debug, Clone)]
pub struct KernelCurvature {
    pub frame: KernelFrame,
    pub frame_change: CMatrix,
    pub tensor: NakanoTensor,
}

/// Curvature of the induced metric via exact bi-polynomial derivatives:
/// after the constant frame change A = L⁻¹ normalizing H(z) = I, the
/// components at z are Θ_{jk̄λν̄} = −∂λ∂ν̄H′_{jk̄} + Σ_ℓ (∂λH′_{jℓ̄})·conj(∂νH′_{kℓ̄}).
pub fn nakano_tensor_kernel(sys: &GeneratorSystem, z: &[Complex64]) -> Result<KernelCurvature> {
    let frame = kernel_frame(sys, z)?;
    let s = frame.dim();
    let n = sys.nvars();
    let h0 = frame.metric_at(z);
    let l = cholesky_lower(&h0)?;
    let a = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::LinearSolve("frame-change factor is singular".into()))?;

    let mut primed: Vec<BiPoly> = Vec::with_capacity(s * s);
    for j in 0..s {
        for k in 0..s {
            let mut acc = BiPoly::zero(n);
            for b_row in 0..s {
                for b_col in 0..s {
                    let coeff = a[(j, b_row)];
                    let coeff_conj = a[(k, b_col)];
                    if coeff.norm() == 0.0 || coeff_conj.norm() == 0.0 {
                        continue;
                    }
                    let term = frame
                        .metric(b_row, b_col)
                        .scale(coeff)
                        .scale_conj(coeff_conj);
                    acc = acc.add(&term)?;
                }
            }
            primed.push(acc);
        }
    }

    let d_z: Vec<Vec<BiPoly>> = primed
        .iter()
        .map(|h| (0..n).map(|lam| h.partial_z(lam)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let mut tensor = NakanoTensor::zeros(s, n)?;
    for j in 0..s {
        for k in 0..s {
            for lam in 0..n {
                for nu in 0..n {
                    let second = d_z[j * s + k][lam].partial_zbar(nu)?.eval(z);
                    let mut gram = Complex64::new(0.0, 0.0);
                    for l_idx in 0..s {
                        let dj = d_z[j * s + l_idx][lam].eval(z);
                        let dk = d_z[k * s + l_idx][nu].eval(z);
                        gram += dj * dk.conj();
                    }
                    tensor.set(j, k, lam, nu, -second + gram);
                }
            }
        }
    }
    Ok(KernelCurvature {
        frame,
        frame_change: l,
        tensor,
    })
}

/// Frame-route Nakano value on a tangent given in the pivot frame;
/// agrees with the closed form on the matching ambient tangent.
pub fn nakano_form_kernel_frame(
    sys: &GeneratorSystem,
    z: &[Complex64],
    v_frame: &CTensor,
) -> Result<f64> {
    let kc = nakano_tensor_kernel(sys, z)?;
    let s = kc.tensor.rank();
    let n = kc.tensor.base();
    if v_frame.rows() != s || v_frame.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "frame tangent must be {s}x{n}, got {}x{}",
            v_frame.rows(),
            v_frame.cols()
        )));
    }
    let l = &kc.frame_change;
    let mut v_ortho = CTensor::zeros(s, n);
    for j in 0..s {
        for lam in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for a_idx in 0..s {
                acc += l[(a_idx, j)] * v_frame.at(a_idx, lam);
            }
            v_ortho.set(j, lam, acc);
        }
    }
    kc.tensor.form_value(&v_ortho)
}

/// Twisted-curvature domination form at z: the curvature of H/|g|^{2γ} on
/// the kernel fiber minus (γ − q)·H⊗ω, flattened over (fiber, base). Its
/// smallest eigenvalue is the certified domination margin.
pub fn twisted_domination(
    sys: &GeneratorSystem,
    z: &[Complex64],
    gamma: f64,
) -> Result<HermitianForm> {
    let q = sys.q();
    if gamma < q as f64 - 1e-12 {
        return Err(Error::TwistBelowRank { gamma, q });
    }
    let kc = nakano_tensor_kernel(sys, z)?;
    let omega = sys.log_hessian(z)?;
    let identity = HermitianForm::identity(kc.tensor.rank());
    let mut twisted = kc.tensor.clone();
    twisted.add_scaled_product(&identity, &omega, gamma)?;
    twisted.add_scaled_product(&identity, &omega, -(gamma - q as f64))?;
    Ok(twisted.flatten())
}

/// Fiber trace of the ∂̄-datum: FbTr_{λν̄} = Σ_j w·F[j,ν]·conj(F[j,λ]) with
/// w = e^{−ψ(z)}/|g|^{2(q+γ)}.
pub fn fbtr(
    sys: &GeneratorSystem,
    f: &MultiPoly,
    psi_at_z: f64,
    gamma: f64,
    z: &[Complex64],
) -> Result<HermitianForm> {
    let gnorm2 = sys.require_nonsingular(z)?;
    let datum = sys.dbar_datum(f, z)?;
    let q = sys.q() as f64;
    let weight = (-psi_at_z).exp() / gnorm2.powf(q + gamma);
    let n = sys.nvars();
    let p = sys.len();
    let mut entries = Vec::with_capacity(n * n);
    for lam in 0..n {
        for nu in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..p {
                acc += datum.at(j, nu) * datum.at(j, lam).conj();
            }
            entries.push(acc * weight);
        }
    }
    HermitianForm::new(n, &entries)
}

/// Trace of A against ω in the ε → 0⁺ sense: Σ over the significant
/// eigenspace of ω of (u†Au)/μ, with an infinite flag when A carries mass
/// on the null space of ω.
pub fn tr_omega(a: &HermitianForm, omega: &HermitianForm) -> Result<PinvLimit> {
    if a.dim() != omega.dim() {
        return Err(Error::ShapeMismatch(format!(
            "trace operands have different dimensions: {} vs {}",
            a.dim(),
            omega.dim()
        )));
    }
    let a_scale = 1.0 + a.max_entry_norm();
    let (vals, vecs) = omega.eigen_system();
    let mu_max = vals.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    if mu_max == 0.0 {
        return Ok(if a.max_entry_norm() <= tol::EIGEN_NULL_REL * a_scale {
            PinvLimit::Finite(0.0)
        } else {
            PinvLimit::Infinite
        });
    }
    let thresh = tol::EIGEN_NULL_REL * mu_max;
    let mut acc = 0.0f64;
    for (mu, u) in vals.iter().zip(vecs.iter()) {
        let pairing = a.value(u.as_slice())?;
        if mu.abs() <= thresh {
            if pairing.abs() > tol::EIGEN_NULL_REL * a_scale {
                return Ok(PinvLimit::Infinite);
            }
        } else {
            acc += pairing / mu;
        }
    }
    Ok(PinvLimit::Finite(acc))
}

/// Max-entry relative residual between Φ·(γ·ω) and the fiber trace, where
/// Φ = |f|²·e^{−ψ}/(γ·|g|^{2(q+γ)}·|g|²); the two sides agree identically,
/// so the residual measures numerical consistency of the assembly.
pub fn fiber_trace_identity_residual(
    sys: &GeneratorSystem,
    f: &MultiPoly,
    psi_at_z: f64,
    gamma: f64,
    z: &[Complex64],
) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument(
            "twist exponent must be positive".into(),
        ));
    }
    let gnorm2 = sys.require_nonsingular(z)?;
    let lhs = fbtr(sys, f, psi_at_z, gamma, z)?;
    let omega = sys.log_hessian(z)?;
    let q = sys.q() as f64;
    let phi = f.eval(z).norm_sqr() * (-psi_at_z).exp()
        / (gamma * gnorm2.powf(q + gamma) * gnorm2);
    let rhs = omega.scale(phi * gamma);
    let scale = 1.0 + rhs.max_entry_norm();
    let mut residual = 0.0f64;
    for lam in 0..sys.nvars() {
        for nu in 0..sys.nvars() {
            residual = residual.max((lhs.entry(lam, nu) - rhs.entry(lam, nu)).norm());
        }
    }
    Ok(residual / scale)
}

/// Difference form LHS − RHS of the logarithmic-weight variant inequality:
/// (A): ∂∂̄ log(1+|g|²) − |g|²/(1+|g|²)·ω, computed with the left side as
/// the log-Hessian of the extended system (g₁,…,g_p, 1);
/// (C): −∂∂̄ log log(1/|g|²) − ω/log(1/|g|²), left side assembled from
/// exact bi-polynomial derivatives of |g|². Both differences are positive
/// semidefinite (rank ≤ 1).
pub fn variant_inequality_check(
    sys: &GeneratorSystem,
    z: &[Complex64],
    which: Variant,
) -> Result<HermitianForm> {
    let gnorm2 = sys.require_nonsingular(z)?;
    let n = sys.nvars();
    match which {
        Variant::A => {
            let mut gens = sys.generators().to_vec();
            gens.push(MultiPoly::one(n));
            let extended = GeneratorSystem::new(gens)?;
            let lhs = extended.log_hessian(z)?;
            let rhs = sys.log_hessian(z)?.scale(gnorm2 / (1.0 + gnorm2));
            lhs.sub(&rhs)
        }
        Variant::C => {
            if gnorm2 >= 1.0 {
                return Err(Error::Precondition(format!(
                    "variant c needs |g(z)|² < 1, got {gnorm2}"
                )));
            }
            let big_l = -gnorm2.ln();
            let g_bi = sys.norm_sq_bipoly();
            let mut entries = Vec::with_capacity(n * n);
            for lam in 0..n {
                let dg = g_bi.partial_z(lam)?;
                for nu in 0..n {
                    let ddg = dg.partial_zbar(nu)?.eval(z);
                    let dgbar = g_bi.partial_zbar(nu)?.eval(z);
                    let dgv = dg.eval(z);
                    let log_hess = ddg / gnorm2 - dgv * dgbar / (gnorm2 * gnorm2);
                    let lhs = log_hess / big_l + dgv * dgbar / (gnorm2 * gnorm2 * big_l * big_l);
                    entries.push(lhs);
                }
            }
            let lhs = HermitianForm::new(n, &entries)?;
            let rhs = sys.log_hessian(z)?.scale(1.0 / big_l);
            lhs.sub(&rhs)
        }
        Variant::B => Err(Error::InvalidArgument(
            "variant b has no pointwise difference form; it is exercised through trace diagnostics".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{
        rand_kernel_tangent, rand_nonvanishing_instance, rand_poly, rng_from_seed,
    };
    use crate::tensor::random_ctensor;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn poly(nvars: usize, terms: &[(&[u32], Complex64)]) -> MultiPoly {
        let mut p = MultiPoly::zero(nvars);
        for (exps, coeff) in terms {
            p = p
                .add(&MultiPoly::monomial(nvars, exps, *coeff).unwrap())
                .unwrap();
        }
        p
    }

    fn z_and_one() -> GeneratorSystem {
        GeneratorSystem::new(vec![
            poly(1, &[(&[1], c(1.0, 0.0))]),
            MultiPoly::one(1),
        ])
        .unwrap()
    }

    fn random_unitary(dim: usize, rng: &mut impl Rng) -> CMatrix {
        let m = CMatrix::from_fn(dim, dim, |_, _| crate::random::rand_complex(rng));
        m.qr().q()
    }

    fn rotated_system(sys: &GeneratorSystem, u: &CMatrix) -> GeneratorSystem {
        let n = sys.nvars();
        let p = sys.len();
        let gens = (0..p)
            .map(|i| {
                let mut acc = MultiPoly::zero(n);
                for j in 0..p {
                    acc = acc.add(&sys.generator(j).scale(u[(i, j)])).unwrap();
                }
                acc
            })
            .collect();
        GeneratorSystem::new(gens).unwrap()
    }

    #[test]
    fn frame_and_metric_match_hand_computation_for_affine_pair() {
        let sys = z_and_one();
        let frame = kernel_frame(&sys, &[c(0.0, 0.0)]).unwrap();
        assert_eq!(frame.pivot(), 1);
        assert_eq!(frame.dim(), 1);
        let rows = frame.rows_at(&[c(0.3, 0.2)]);
        assert!((rows.at(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((rows.at(0, 1) - c(-0.3, -0.2)).norm() < 1e-15);
        let h0 = frame.metric_at(&[c(0.0, 0.0)]);
        assert!((h0[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        let h1 = frame.metric_at(&[c(1.0, 0.0)]);
        assert!((h1[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn frame_metric_is_identity_at_normal_points() {
        let sys = GeneratorSystem::new(vec![
            poly(2, &[(&[1, 0], c(1.0, 0.0))]),
            poly(2, &[(&[0, 1], c(1.0, 0.0))]),
            MultiPoly::one(2),
        ])
        .unwrap();
        let frame = kernel_frame(&sys, &[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(frame.pivot(), 2);
        let h = frame.metric_at(&[c(0.0, 0.0), c(0.0, 0.0)]);
        for j in 0..2 {
            for k in 0..2 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((h[(j, k)] - c(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn frame_rows_contract_to_zero_against_generators() {
        let mut rng = rng_from_seed(301);
        for _ in 0..30 {
            let (sys, z) = rand_nonvanishing_instance(2, 3, 2, &mut rng);
            let frame = kernel_frame(&sys, &z).unwrap();
            let probe = crate::random::rand_point(2, 0.9, &mut rng);
            let rows = frame.rows_at(&probe);
            let g = sys.eval_all(&probe);
            for j in 0..frame.dim() {
                let s: Complex64 = (0..sys.len()).map(|m| rows.at(j, m) * g[m]).sum();
                assert!(s.norm() < 1e-12, "row contraction {}", s.norm());
            }
        }
    }

    #[test]
    fn frame_requires_two_generators_and_a_noncritical_point() {
        let single = GeneratorSystem::new(vec![MultiPoly::one(1)]).unwrap();
        assert!(matches!(
            kernel_frame(&single, &[c(0.0, 0.0)]),
            Err(Error::TrivialKernel)
        ));
        let vanishing = GeneratorSystem::new(vec![
            poly(1, &[(&[1], c(1.0, 0.0))]),
            poly(1, &[(&[2], c(1.0, 0.0))]),
        ])
        .unwrap();
        assert!(matches!(
            kernel_frame(&vanishing, &[c(0.0, 0.0)]),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn closed_form_matches_hand_value_and_rejects_constraint_violations() {
        let sys = z_and_one();
        let mut v = CTensor::zeros(2, 1);
        v.set(0, 0, c(1.0, 0.0));
        let value = nakano_form_kernel_closed(&sys, &[c(0.0, 0.0)], &v).unwrap();
        assert!((value + 1.0).abs() < 1e-14);

        let mut bad = CTensor::zeros(2, 1);
        bad.set(1, 0, c(1.0, 0.0));
        assert!(matches!(
            nakano_form_kernel_closed(&sys, &[c(0.0, 0.0)], &bad),
            Err(Error::KernelConstraint { .. })
        ));
    }

    #[test]
    fn closed_form_vanishes_for_constant_systems() {
        let sys = GeneratorSystem::new(vec![
            MultiPoly::constant(1, c(0.8, 0.0)),
            MultiPoly::constant(1, c(0.0, 0.6)),
        ])
        .unwrap();
        let mut rng = rng_from_seed(303);
        let g = sys.eval_all(&[c(0.2, 0.1)]);
        let v = rand_kernel_tangent(&g, 1, &mut rng);
        let value = nakano_form_kernel_closed(&sys, &[c(0.2, 0.1)], &v).unwrap();
        assert!(value.abs() < 1e-14);
    }

    #[test]
    fn closed_form_is_invariant_under_constant_unitary_rotation() {
        let mut rng = rng_from_seed(305);
        for _ in 0..25 {
            let (sys, z) = rand_nonvanishing_instance(2, 3, 2, &mut rng);
            let g = sys.eval_all(&z);
            let v = rand_kernel_tangent(&g, 2, &mut rng);
            let base = nakano_form_kernel_closed(&sys, &z, &v).unwrap();

            let u = random_unitary(3, &mut rng);
            let rotated = rotated_system(&sys, &u);
            let mut v_rot = CTensor::zeros(3, 2);
            for i in 0..3 {
                for lam in 0..2 {
                    let mut acc = c(0.0, 0.0);
                    for j in 0..3 {
                        acc += u[(i, j)].conj() * v.at(j, lam);
                    }
                    v_rot.set(i, lam, acc);
                }
            }
            let rotated_value = nakano_form_kernel_closed(&rotated, &z, &v_rot).unwrap();
            let scale = 1.0 + base.abs();
            assert!(
                (base - rotated_value).abs() < 1e-11 * scale,
                "{base} vs {rotated_value}"
            );
        }
    }

    #[test]
    fn frame_route_reproduces_hand_values() {
        let sys = z_and_one();
        let mut v = CTensor::zeros(1, 1);
        v.set(0, 0, c(1.0, 0.0));
        let at0 = nakano_form_kernel_frame(&sys, &[c(0.0, 0.0)], &v).unwrap();
        assert!((at0 + 1.0).abs() < 1e-12, "value at origin {at0}");

        // At z = 1 the metric is 2, the orthonormalized tangent has norm
        // squared 2, and the curvature coefficient drops to −1/4.
        let at1 = nakano_form_kernel_frame(&sys, &[c(1.0, 0.0)], &v).unwrap();
        assert!((at1 + 0.5).abs() < 1e-12, "value at one {at1}");

        let degenerate = GeneratorSystem::new(vec![
            poly(2, &[(&[1, 1], c(1.0, 0.0))]),
            MultiPoly::one(2),
        ])
        .unwrap();
        let v2 = random_ctensor(1, 2, &mut rng_from_seed(1));
        let flat = nakano_form_kernel_frame(&degenerate, &[c(0.0, 0.0), c(0.0, 0.0)], &v2).unwrap();
        assert!(flat.abs() < 1e-13, "mixed-degree system is flat at 0: {flat}");
    }

    #[test]
    fn frame_and_closed_routes_agree_on_random_instances() {
        let mut rng = rng_from_seed(307);
        let mut checked = 0usize;
        while checked < 100 {
            let nvars = 1 + (rng.gen::<u32>() % 3) as usize;
            let p = 2 + (rng.gen::<u32>() % 2) as usize;
            let (sys, z) = rand_nonvanishing_instance(nvars, p, 2, &mut rng);
            let g = sys.eval_all(&z);
            let v_amb = rand_kernel_tangent(&g, nvars, &mut rng);
            let closed = nakano_form_kernel_closed(&sys, &z, &v_amb).unwrap();
            assert!(closed <= 1e-12, "closed form must be nonpositive: {closed}");

            let frame = kernel_frame(&sys, &z).unwrap();
            let v_frame = frame.frame_from_ambient(&sys, &v_amb, &z).unwrap();
            let by_frame = nakano_form_kernel_frame(&sys, &z, &v_frame).unwrap();
            let scale = 1.0 + closed.abs();
            assert!(
                (closed - by_frame).abs() < tol::CURVATURE_ROUTES_REL * scale,
                "routes disagree: closed {closed} vs frame {by_frame}"
            );
            checked += 1;
        }
    }

    #[test]
    fn ambient_and_frame_coordinates_round_trip() {
        let mut rng = rng_from_seed(309);
        let (sys, z) = rand_nonvanishing_instance(2, 3, 2, &mut rng);
        let frame = kernel_frame(&sys, &z).unwrap();
        let g = sys.eval_all(&z);
        let v_amb = rand_kernel_tangent(&g, 2, &mut rng);
        let v_frame = frame.frame_from_ambient(&sys, &v_amb, &z).unwrap();
        let back = frame.ambient_from_frame(&v_frame, &z).unwrap();
        for j in 0..3 {
            for lam in 0..2 {
                assert!((back.at(j, lam) - v_amb.at(j, lam)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn twisted_domination_is_zero_for_the_equality_case() {
        let sys = z_and_one();
        for gamma in [1.0, 2.0] {
            let m = twisted_domination(&sys, &[c(0.0, 0.0)], gamma).unwrap();
            assert_eq!(m.dim(), 1);
            assert!(
                m.max_entry_norm() < 1e-12,
                "twist γ={gamma} leaves residual {}",
                m.max_entry_norm()
            );
            assert!(m.min_eigenvalue().abs() < 1e-12);
        }
    }

    #[test]
    fn twisted_domination_rejects_small_twists_and_holds_on_randoms() {
        let sys = z_and_one();
        assert!(matches!(
            twisted_domination(&sys, &[c(0.0, 0.0)], 0.5),
            Err(Error::TwistBelowRank { .. })
        ));

        let mut rng = rng_from_seed(311);
        for _ in 0..40 {
            let (sys, z) = rand_nonvanishing_instance(2, 3, 2, &mut rng);
            let q = sys.q() as f64;
            for offset in [0.0, 0.5, 1.0] {
                let m = twisted_domination(&sys, &z, q + offset).unwrap();
                let scale = 1.0 + m.max_entry_norm();
                assert!(
                    m.min_eigenvalue() >= -tol::DOMINATION_REL * scale,
                    "domination failed: λ_min {} at scale {scale}",
                    m.min_eigenvalue()
                );
            }
        }
    }

    #[test]
    fn fiber_trace_is_psd_and_vanishes_for_zero_numerator() {
        let sys = z_and_one();
        let zero = MultiPoly::zero(1);
        let trace = fbtr(&sys, &zero, 0.0, 1.0, &[c(0.3, 0.1)]).unwrap();
        assert!(trace.max_entry_norm() < 1e-15);

        let mut rng = rng_from_seed(313);
        for _ in 0..30 {
            let (sys, z) = rand_nonvanishing_instance(2, 3, 2, &mut rng);
            let f = rand_poly(2, 2, &mut rng);
            let trace = fbtr(&sys, &f, 0.2, 1.5, &z).unwrap();
            let scale = 1.0 + trace.max_entry_norm();
            assert!(trace.min_eigenvalue() >= -1e-12 * scale);
        }
    }

    #[test]
    fn trace_against_omega_matches_rank_zero_and_infinity_cases() {
        let mut rng = rng_from_seed(317);
        let (sys, z) = rand_nonvanishing_instance(2, 2, 2, &mut rng);
        let omega = sys.log_hessian(&z).unwrap();
        assert_eq!(omega.eps_rank(), 1, "p = 2 keeps the form rank one");

        let self_trace = tr_omega(&omega, &omega).unwrap().expect_finite();
        assert!((self_trace - 1.0).abs() < 1e-9, "tr_ω(ω) = rank: {self_trace}");

        let zero = HermitianForm::zeros(2);
        assert_eq!(tr_omega(&zero, &omega).unwrap(), PinvLimit::Finite(0.0));

        let id = HermitianForm::identity(2);
        assert_eq!(tr_omega(&id, &omega).unwrap(), PinvLimit::Infinite);
    }

    #[test]
    fn fiber_trace_identity_holds_at_the_normal_point_and_on_randoms() {
        let sys = z_and_one();
        let f = MultiPoly::one(1);
        let z0 = [c(0.0, 0.0)];
        let residual = fiber_trace_identity_residual(&sys, &f, 0.0, 1.0, &z0).unwrap();
        assert!(residual < 1e-12, "residual {residual}");
        let trace = fbtr(&sys, &f, 0.0, 1.0, &z0).unwrap();
        assert!((trace.entry(0, 0) - c(1.0, 0.0)).norm() < 1e-12);

        let mut rng = rng_from_seed(319);
        for _ in 0..100 {
            let nvars = 1 + (rng.gen::<u32>() % 2) as usize;
            let p = 2 + (rng.gen::<u32>() % 2) as usize;
            let (sys, z) = rand_nonvanishing_instance(nvars, p, 2, &mut rng);
            let f = rand_poly(nvars, 2, &mut rng);
            let gamma = 1.0 + rng.gen::<f64>() * 2.0;
            let psi = rng.gen::<f64>() - 0.5;
            let residual = fiber_trace_identity_residual(&sys, &f, psi, gamma, &z).unwrap();
            assert!(residual <= tol::TRACE_IDENTITY_ABS, "residual {residual}");
        }
    }

    #[test]
    fn variant_differences_are_psd_and_match_their_rank_one_closed_forms() {
        let mut rng = rng_from_seed(323);
        for _ in 0..60 {
            let (sys, z) = rand_nonvanishing_instance(2, 3, 2, &mut rng);
            let gnorm2 = sys.gnorm2(&z);
            let diff = variant_inequality_check(&sys, &z, Variant::A).unwrap();
            let scale = 1.0 + diff.max_entry_norm();
            assert!(diff.min_eigenvalue() >= -tol::PSD_FORM_REL * scale);

            // Rank-one closed form: T_λ·conj(T_ν)/(|g|²(1+|g|²)²).
            let g = sys.eval_all(&z);
            let grad = sys.grad_matrix(&z);
            let mut t = [c(0.0, 0.0); 2];
            for lam in 0..2 {
                for j in 0..3 {
                    t[lam] += grad.at(j, lam) * g[j].conj();
                }
            }
            let denom = gnorm2 * (1.0 + gnorm2) * (1.0 + gnorm2);
            for lam in 0..2 {
                for nu in 0..2 {
                    let want = t[lam] * t[nu].conj() / denom;
                    assert!(
                        (diff.entry(lam, nu) - want).norm() < 1e-10 * scale,
                        "closed-form mismatch at ({lam},{nu})"
                    );
                }
            }
        }
    }

    #[test]
    fn variant_c_needs_small_norms_and_matches_its_closed_form() {
        let sys = GeneratorSystem::new(vec![poly(1, &[(&[1], c(0.5, 0.0))])]).unwrap();
        let diff = variant_inequality_check(&sys, &[c(0.1, 0.0)], Variant::C).unwrap();
        assert!(diff.entry(0, 0).re >= 0.0);

        let big = z_and_one();
        assert!(matches!(
            variant_inequality_check(&big, &[c(0.0, 0.0)], Variant::C),
            Err(Error::Precondition(_))
        ));

        let mut rng = rng_from_seed(329);
        let mut checked = 0;
        while checked < 40 {
            let (sys, z) = rand_nonvanishing_instance(2, 2, 2, &mut rng);
            // Shrink the system into the unit ball around the sample point.
            let gnorm2 = sys.gnorm2(&z);
            let shrink = 0.5 / (1.0 + gnorm2.sqrt());
            let scaled = GeneratorSystem::new(
                sys.generators()
                    .iter()
                    .map(|g| g.scale(c(shrink, 0.0)))
                    .collect(),
            )
            .unwrap();
            let gs = scaled.gnorm2(&z);
            if !(1e-6..1.0).contains(&gs) {
                continue;
            }
            let diff = variant_inequality_check(&scaled, &z, Variant::C).unwrap();
            let scale = 1.0 + diff.max_entry_norm();
            assert!(diff.min_eigenvalue() >= -tol::PSD_FORM_REL * scale);

            let big_l = -gs.ln();
            let g = scaled.eval_all(&z);
            let grad = scaled.grad_matrix(&z);
            let mut t = [c(0.0, 0.0); 2];
            for lam in 0..2 {
                for j in 0..2 {
                    t[lam] += grad.at(j, lam) * g[j].conj();
                }
            }
            let denom = gs * gs * big_l * big_l;
            for lam in 0..2 {
                for nu in 0..2 {
                    let want = t[lam] * t[nu].conj() / denom;
                    assert!(
                        (diff.entry(lam, nu) - want).norm() < 1e-9 * scale,
                        "closed-form mismatch at ({lam},{nu})"
                    );
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn pinv_pairing_satisfies_the_cauchy_schwarz_bound() {
        let mut rng = rng_from_seed(331);
        for _ in 0..60 {
            let dim = 2 + (rng.gen::<u32>() % 4) as usize;
            let mut theta = HermitianForm::zeros(dim);
            for _ in 0..dim + 2 {
                let a = crate::hermitian::CVector::from_fn(dim, |_, _| {
                    crate::random::rand_complex(&mut rng)
                });
                theta = theta
                    .add(&HermitianForm::from_matrix(&a * a.adjoint()).unwrap())
                    .unwrap();
            }
            let f = crate::hermitian::CVector::from_fn(dim, |_, _| {
                crate::random::rand_complex(&mut rng)
            });
            let fp = crate::hermitian::CVector::from_fn(dim, |_, _| {
                crate::random::rand_complex(&mut rng)
            });
            let pairing = f.dotc(&fp).norm_sqr();
            let lhs_weight = theta.pinv_quad(&f).unwrap().expect_finite();
            let rhs_weight = theta.value(fp.as_slice()).unwrap();
            assert!(
                pairing <= lhs_weight * rhs_weight + 1e-10,
                "{pairing} > {lhs_weight} * {rhs_weight}"
            );
        }
    }
}
