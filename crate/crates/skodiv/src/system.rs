//! Generator systems g = (g₁,…,g_p): joint evaluation, gradient matrices,
//! the (1,1)-form ∂∂̄ log|g|² computed by two independent routes, and the
//! ∂̄-datum attached to a numerator f.

use num_complex::Complex64;

use crate::bipoly::BiPoly;
use crate::error::{Error, Result};
use crate::hermitian::HermitianForm;
use crate::poly::MultiPoly;
use crate::tensor::CTensor;
use crate::tol;

/// A tuple of polynomials in the same variables, not all identically zero.
/// Holomorphic partials of every generator are precomputed so point
/// evaluations stay cheap inside integration loops.
#[derive(Debug, Clone)]
pub struct GeneratorSystem {
    nvars: usize,
    gens: Vec<MultiPoly>,
    grads: Vec<Vec<MultiPoly>>,
}

/// Both evaluations of ∂∂̄ log|g|² at a point, plus their worst entrywise
/// relative disagreement; the two routes are algebraically equal, so the
/// disagreement measures numerical consistency only.
#[derive(Debug, Clone)]
pub struct LogHessianPair {
    pub quotient: HermitianForm,
    pub wedge: HermitianForm,
    pub max_rel_diff: f64,
}

impl GeneratorSystem {
    pub fn new(gens: Vec<MultiPoly>) -> Result<Self> {
        let first = gens
            .first()
            .ok_or_else(|| Error::InvalidArgument("generator list is empty".into()))?;
        let nvars = first.nvars();
        if gens.iter().any(|g| g.nvars() != nvars) {
            return Err(Error::ShapeMismatch(
                "all generators must share the same variable count".into(),
            ));
        }
        if gens.iter().all(|g| g.is_zero()) {
            return Err(Error::ZeroSystem);
        }
        let grads = gens
            .iter()
            .map(|g| (0..nvars).map(|axis| g.partial(axis)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nvars, gens, grads })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of generators p.
    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// q = min(n, p−1), the rank bound for ∂∂̄ log|g|².
    pub fn q(&self) -> usize {
        self.nvars.min(self.gens.len() - 1)
    }

    pub fn generators(&self) -> &[MultiPoly] {
        &self.gens
    }

    pub fn generator(&self, j: usize) -> &MultiPoly {
        &self.gens[j]
    }

    pub fn partial(&self, j: usize, axis: usize) -> &MultiPoly {
        &self.grads[j][axis]
    }

    /// |g|² = Σ g_j·conj(g_j) as an exact bi-polynomial.
    pub fn norm_sq_bipoly(&self) -> BiPoly {
        let mut acc = BiPoly::zero(self.nvars);
        for g in &self.gens {
            acc = acc.add(&BiPoly::norm_sq(g)).expect("same arity");
        }
        acc
    }

    pub fn eval_all(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.gens.iter().map(|g| g.eval(z)).collect()
    }

    pub fn gnorm2(&self, z: &[Complex64]) -> f64 {
        self.gens.iter().map(|g| g.eval(z).norm_sqr()).sum()
    }

    /// True when z is numerically a common zero of all generators.
    pub fn is_common_zero(&self, z: &[Complex64]) -> bool {
        self.gnorm2(z) < tol::NODE_FLOOR
    }

    /// |g(z)|², or a singularity error at a common zero.
    pub fn require_nonsingular(&self, z: &[Complex64]) -> Result<f64> {
        let gnorm2 = self.gnorm2(z);
        if gnorm2 < tol::NODE_FLOOR {
            return Err(Error::Singularity { gnorm2 });
        }
        Ok(gnorm2)
    }

    /// p×n matrix with entry [j,λ] = ∂λ g_j(z).
    pub fn grad_matrix(&self, z: &[Complex64]) -> CTensor {
        let p = self.len();
        let mut m = CTensor::zeros(p, self.nvars);
        for j in 0..p {
            for lam in 0..self.nvars {
                m.set(j, lam, self.grads[j][lam].eval(z));
            }
        }
        m
    }

    /// ∂∂̄ log|g|² by the quotient rule:
    /// ω_{λν̄} = A_{λν̄}/|g|² − T_λ·conj(T_ν)/|g|⁴ with
    /// A_{λν̄} = Σ_j ∂λg_j·conj(∂νg_j) and T_λ = Σ_j ∂λg_j·conj(g_j).
    pub fn log_hessian(&self, z: &[Complex64]) -> Result<HermitianForm> {
        let gnorm2 = self.require_nonsingular(z)?;
        let g = self.eval_all(z);
        let grad = self.grad_matrix(z);
        let n = self.nvars;
        let p = self.len();
        let mut t = vec![Complex64::new(0.0, 0.0); n];
        for (lam, t_lam) in t.iter_mut().enumerate() {
            for j in 0..p {
                *t_lam += grad.at(j, lam) * g[j].conj();
            }
        }
        let mut entries = Vec::with_capacity(n * n);
        for lam in 0..n {
            for nu in 0..n {
                let mut a = Complex64::new(0.0, 0.0);
                for j in 0..p {
                    a += grad.at(j, lam) * grad.at(j, nu).conj();
                }
                entries.push(a / gnorm2 - t[lam] * t[nu].conj() / (gnorm2 * gnorm2));
            }
        }
        HermitianForm::new(n, &entries)
    }

    /// ∂∂̄ log|g|² by the pair-wedge expansion:
    /// ω_{λν̄} = (1/|g|⁴)·Σ_{j<k} (∂λg_j·g_k − ∂λg_k·g_j)·conj(∂νg_j·g_k − ∂νg_k·g_j).
    pub fn log_hessian_wedge(&self, z: &[Complex64]) -> Result<HermitianForm> {
        let gnorm2 = self.require_nonsingular(z)?;
        let g = self.eval_all(z);
        let grad = self.grad_matrix(z);
        let n = self.nvars;
        let p = self.len();
        let mut entries = Vec::with_capacity(n * n);
        for lam in 0..n {
            for nu in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..p {
                    for k in (j + 1)..p {
                        let wl = grad.at(j, lam) * g[k] - grad.at(k, lam) * g[j];
                        let wn = grad.at(j, nu) * g[k] - grad.at(k, nu) * g[j];
                        acc += wl * wn.conj();
                    }
                }
                entries.push(acc / (gnorm2 * gnorm2));
            }
        }
        HermitianForm::new(n, &entries)
    }

    /// Both log-Hessian routes with their worst entrywise relative gap.
    pub fn log_hessian_pair(&self, z: &[Complex64]) -> Result<LogHessianPair> {
        let quotient = self.log_hessian(z)?;
        let wedge = self.log_hessian_wedge(z)?;
        let scale = quotient.max_entry_norm().max(wedge.max_entry_norm());
        let mut max_rel_diff = 0.0f64;
        for lam in 0..self.nvars {
            for nu in 0..self.nvars {
                let d = (quotient.entry(lam, nu) - wedge.entry(lam, nu)).norm();
                max_rel_diff = max_rel_diff.max(d / (1.0 + scale));
            }
        }
        Ok(LogHessianPair {
            quotient,
            wedge,
            max_rel_diff,
        })
    }

    /// The ∂̄-datum of a numerator f: entry [j,ν] = f·( conj(∂νg_j)/|g|²
    /// − conj(g_j)·conj(T_ν)/|g|⁴ ). Contracting against g gives zero, so
    /// the datum is valued in the kernel of (v₁,…,v_p) ↦ Σ g_j v_j.
    pub fn dbar_datum(&self, f: &MultiPoly, z: &[Complex64]) -> Result<CTensor> {
        if f.nvars() != self.nvars {
            return Err(Error::ShapeMismatch(
                "numerator arity does not match the generator system".into(),
            ));
        }
        let gnorm2 = self.require_nonsingular(z)?;
        let g = self.eval_all(z);
        let grad = self.grad_matrix(z);
        let fz = f.eval(z);
        let n = self.nvars;
        let p = self.len();
        let mut t = vec![Complex64::new(0.0, 0.0); n];
        for (nu, t_nu) in t.iter_mut().enumerate() {
            for j in 0..p {
                *t_nu += grad.at(j, nu) * g[j].conj();
            }
        }
        let mut out = CTensor::zeros(p, n);
        for j in 0..p {
            for nu in 0..n {
                let v = fz * (grad.at(j, nu).conj() / gnorm2
                    - g[j].conj() * t[nu].conj() / (gnorm2 * gnorm2));
                out.set(j, nu, v);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{rand_nonvanishing_instance, rand_poly, rng_from_seed};

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

    #[test]
    fn rejects_empty_mismatched_and_all_zero_inputs() {
        assert!(matches!(
            GeneratorSystem::new(vec![]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            GeneratorSystem::new(vec![MultiPoly::one(1), MultiPoly::one(2)]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            GeneratorSystem::new(vec![MultiPoly::zero(2), MultiPoly::zero(2)]),
            Err(Error::ZeroSystem)
        ));
    }

    #[test]
    fn norms_gradients_and_rank_parameters() {
        let sys = z_and_one();
        assert_eq!(sys.q(), 1);
        let zero = [c(0.0, 0.0)];
        assert!((sys.gnorm2(&zero) - 1.0).abs() < 1e-15);
        let grad = sys.grad_matrix(&zero);
        assert_eq!((grad.at(0, 0), grad.at(1, 0)), (c(1.0, 0.0), c(0.0, 0.0)));

        let three = GeneratorSystem::new(vec![
            poly(2, &[(&[1, 0], c(1.0, 0.0))]),
            poly(2, &[(&[0, 1], c(1.0, 0.0))]),
            MultiPoly::one(2),
        ])
        .unwrap();
        assert!((three.gnorm2(&[c(1.0, 0.0), c(0.0, 1.0)]) - 3.0).abs() < 1e-15);
        assert_eq!(three.q(), 2);
    }

    #[test]
    fn common_zero_is_flagged_and_raises_singularity() {
        let sys = GeneratorSystem::new(vec![
            poly(1, &[(&[1], c(1.0, 0.0))]),
            poly(1, &[(&[2], c(1.0, 0.0))]),
        ])
        .unwrap();
        let zero = [c(0.0, 0.0)];
        assert!(sys.is_common_zero(&zero));
        assert!(matches!(
            sys.log_hessian(&zero),
            Err(Error::Singularity { .. })
        ));
        assert!(!sys.is_common_zero(&[c(0.5, 0.0)]));
    }

    #[test]
    fn log_hessian_matches_closed_form_for_affine_pair() {
        // For (z, 1): ∂∂̄ log(1+|z|²) = 1/(1+|z|²)².
        let sys = z_and_one();
        let at0 = sys.log_hessian(&[c(0.0, 0.0)]).unwrap();
        assert!((at0.entry(0, 0) - c(1.0, 0.0)).norm() < 1e-14);
        let at1 = sys.log_hessian(&[c(1.0, 0.0)]).unwrap();
        assert!((at1.entry(0, 0) - c(0.25, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn log_hessian_of_single_constant_vanishes() {
        let sys = GeneratorSystem::new(vec![MultiPoly::constant(1, c(0.7, 0.2))]).unwrap();
        let h = sys.log_hessian(&[c(0.3, -0.4)]).unwrap();
        assert!(h.max_entry_norm() < 1e-15);
        assert_eq!(sys.q(), 0);
    }

    #[test]
    fn both_hessian_routes_agree_and_are_psd_with_bounded_rank() {
        let mut rng = rng_from_seed(101);
        for _ in 0..150 {
            let nvars = 1 + (rng.gen::<u32>() % 3) as usize;
            let p = 2 + (rng.gen::<u32>() % 3) as usize;
            let (sys, z) = rand_nonvanishing_instance(nvars, p, 2, &mut rng);
            let pair = sys.log_hessian_pair(&z).unwrap();
            assert!(
                pair.max_rel_diff < tol::LOG_HESSIAN_ROUTES_REL,
                "route disagreement {}",
                pair.max_rel_diff
            );
            let lam_min = pair.quotient.min_eigenvalue();
            let lam_max = pair.quotient.max_eigenvalue();
            assert!(lam_min >= -1e-10 * (1.0 + lam_max), "λ_min = {lam_min}");
            assert!(pair.quotient.eps_rank() <= sys.q());
        }
    }

    #[test]
    fn dbar_datum_matches_hand_computation_at_origin() {
        let sys = z_and_one();
        let f = MultiPoly::one(1);
        let datum = sys.dbar_datum(&f, &[c(0.0, 0.0)]).unwrap();
        assert!((datum.at(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        assert!(datum.at(1, 0).norm() < 1e-15);

        let zero_f = MultiPoly::zero(1);
        let zero_datum = sys.dbar_datum(&zero_f, &[c(0.4, 0.1)]).unwrap();
        assert!(zero_datum.max_norm() < 1e-15);
    }

    #[test]
    fn dbar_datum_contracts_to_zero_against_generators() {
        let mut rng = rng_from_seed(202);
        for _ in 0..100 {
            let nvars = 1 + (rng.gen::<u32>() % 3) as usize;
            let p = 2 + (rng.gen::<u32>() % 3) as usize;
            let (sys, z) = rand_nonvanishing_instance(nvars, p, 2, &mut rng);
            let f = rand_poly(nvars, 2, &mut rng);
            let datum = sys.dbar_datum(&f, &z).unwrap();
            let g = sys.eval_all(&z);
            let scale = 1.0 + datum.max_norm();
            for nu in 0..nvars {
                let s: Complex64 = (0..p).map(|j| g[j] * datum.at(j, nu)).sum();
                assert!(
                    s.norm() <= 1e-12 * scale,
                    "contraction residual {} at scale {}",
                    s.norm(),
                    scale
                );
            }
        }
    }

    use rand::Rng;
}
