//! Dense Hermitian forms, four-index curvature tensors, and the complex
//! linear-algebra helpers (eigendecomposition, least squares, nullspaces,
//! Cholesky) the geometric checks are built on.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::CTensor;
use crate::tol;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Value of a pairing taken as the ε → 0⁺ limit against (A + εI)⁻¹: finite
/// when the argument stays inside the range of A, +∞ when it leaks into the
/// null space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PinvLimit {
    Finite(f64),
    Infinite,
}

impl PinvLimit {
    pub fn is_finite(&self) -> bool {
        matches!(self, PinvLimit::Finite(_))
    }

    /// Finite value, panicking on the infinite flag.
    pub fn expect_finite(&self) -> f64 {
        match self {
            PinvLimit::Finite(v) => *v,
            PinvLimit::Infinite => panic!("pairing diverged"),
        }
    }
}

/// A square complex matrix kept Hermitian by symmetrizing on construction,
/// so the quadratic form v ↦ v†Mv is real-valued up to roundoff.
#[derive(Debug, Clone)]
pub struct HermitianForm {
    mat: CMatrix,
}

impl HermitianForm {
    /// Builds from row-major entries, replacing M by (M + M†)/2.
    pub fn new(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries for a {dim}x{dim} form, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::from_matrix(CMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "form matrix must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.is_empty() {
            return Err(Error::InvalidArgument("form dimension must be >= 1".into()));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("form entries must be finite".into()));
        }
        let sym = (&mat + mat.adjoint()).scale(0.5);
        Ok(Self { mat: sym })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CMatrix::zeros(dim.max(1), dim.max(1)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim.max(1), dim.max(1)),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        self.mat[(j, k)]
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            mat: &self.mat - &other.mat,
        })
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            mat: self.mat.scale(t),
        }
    }

    /// Largest entry magnitude; the natural scale for entrywise tolerances.
    pub fn max_entry_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// v†Mv, real for the symmetrized matrix.
    pub fn value(&self, v: &[Complex64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "vector length {} does not match form dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.dim() {
            for k in 0..self.dim() {
                acc += v[j].conj() * self.mat[(j, k)] * v[k];
            }
        }
        Ok(acc.re)
    }

    /// Eigenvalues in ascending order (all real by Hermitian symmetry).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self
            .mat
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().unwrap()
    }

    /// Eigenpairs in ascending eigenvalue order; eigenvectors orthonormal.
    pub fn eigen_system(&self) -> (Vec<f64>, Vec<CVector>) {
        let se = self.mat.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
        let vals = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let vecs = order
            .iter()
            .map(|&i| CVector::from_column_slice(se.eigenvectors.column(i).as_slice()))
            .collect();
        (vals, vecs)
    }

    /// Count of eigenvalues with |λ| above the relative null threshold.
    pub fn eps_rank(&self) -> usize {
        let vals = self.eigenvalues();
        let lam_max = vals.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
        if lam_max == 0.0 {
            return 0;
        }
        let thresh = tol::EIGEN_NULL_REL * lam_max;
        vals.iter().filter(|l| l.abs() > thresh).count()
    }

    /// ⟨M⁺v, v⟩ in the ε → 0⁺ sense: +∞ when v has a component in the null
    /// space beyond the eigen-threshold.
    pub fn pinv_quad(&self, v: &CVector) -> Result<PinvLimit> {
        if v.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "vector length {} does not match form dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let vnorm = v.norm();
        if vnorm == 0.0 {
            return Ok(PinvLimit::Finite(0.0));
        }
        let (vals, vecs) = self.eigen_system();
        let lam_max = vals.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
        let thresh = tol::EIGEN_NULL_REL * lam_max;
        let mut acc = 0.0f64;
        for (lam, u) in vals.iter().zip(vecs.iter()) {
            let overlap = u.dotc(v);
            if lam.abs() <= thresh {
                if overlap.norm() > tol::EIGEN_NULL_REL * vnorm {
                    return Ok(PinvLimit::Infinite);
                }
            } else {
                acc += overlap.norm_sqr() / lam;
            }
        }
        Ok(PinvLimit::Finite(acc))
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch(format!(
                "form dimensions differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

/// Four-index curvature coefficients Θ_{jk̄λν̄} over fiber rank r and base
/// dimension n, flattening to a Hermitian form on ℂ^{r·n} via (j,λ) ↦ j·n+λ.
#[derive(Debug, Clone)]
pub struct NakanoTensor {
    rank: usize,
    base: usize,
    data: Vec<Complex64>,
}

impl NakanoTensor {
    pub fn zeros(rank: usize, base: usize) -> Result<Self> {
        if rank == 0 || base == 0 {
            return Err(Error::InvalidArgument(
                "curvature tensor needs rank >= 1 and base dimension >= 1".into(),
            ));
        }
        Ok(Self {
            rank,
            base,
            data: vec![Complex64::new(0.0, 0.0); rank * rank * base * base],
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn base(&self) -> usize {
        self.base
    }

    fn idx(&self, j: usize, k: usize, lam: usize, nu: usize) -> usize {
        assert!(j < self.rank && k < self.rank && lam < self.base && nu < self.base);
        ((j * self.rank + k) * self.base + lam) * self.base + nu
    }

    pub fn at(&self, j: usize, k: usize, lam: usize, nu: usize) -> Complex64 {
        self.data[self.idx(j, k, lam, nu)]
    }

    pub fn set(&mut self, j: usize, k: usize, lam: usize, nu: usize, w: Complex64) {
        let i = self.idx(j, k, lam, nu);
        self.data[i] = w;
    }

    pub fn add_at(&mut self, j: usize, k: usize, lam: usize, nu: usize, w: Complex64) {
        let i = self.idx(j, k, lam, nu);
        self.data[i] += w;
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rank != other.rank || self.base != other.base {
            return Err(Error::ShapeMismatch(format!(
                "tensor shapes differ: ({},{}) vs ({},{})",
                self.rank, self.base, other.rank, other.base
            )));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
        Ok(out)
    }

    pub fn scale(&self, t: f64) -> Self {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= t;
        }
        out
    }

    /// Adds c · h_{jk̄} · w_{λν̄}: the tensor product of a fiber form with a
    /// base form, used for curvature twists.
    pub fn add_scaled_product(
        &mut self,
        h: &HermitianForm,
        w: &HermitianForm,
        c: f64,
    ) -> Result<()> {
        if h.dim() != self.rank || w.dim() != self.base {
            return Err(Error::ShapeMismatch(format!(
                "product factors ({},{}) do not match tensor shape ({},{})",
                h.dim(),
                w.dim(),
                self.rank,
                self.base
            )));
        }
        for j in 0..self.rank {
            for k in 0..self.rank {
                for lam in 0..self.base {
                    for nu in 0..self.base {
                        self.add_at(j, k, lam, nu, h.entry(j, k) * w.entry(lam, nu) * c);
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest deviation from the Hermitian symmetry Θ_{jk̄λν̄} = conj(Θ_{kj̄νλ̄}).
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.rank {
            for k in 0..self.rank {
                for lam in 0..self.base {
                    for nu in 0..self.base {
                        let d = (self.at(j, k, lam, nu) - self.at(k, j, nu, lam).conj()).norm();
                        worst = worst.max(d);
                    }
                }
            }
        }
        worst
    }

    /// Hermitian form on ℂ^{r·n} under the index pairing (j,λ) ↦ j·n+λ,
    /// arranged so that the form's v†Mv equals `form_value` on the
    /// row-major flattening of v (the conjugated slot is (k,ν)).
    pub fn flatten(&self) -> HermitianForm {
        let d = self.rank * self.base;
        let mut m = CMatrix::zeros(d, d);
        for j in 0..self.rank {
            for k in 0..self.rank {
                for lam in 0..self.base {
                    for nu in 0..self.base {
                        m[(k * self.base + nu, j * self.base + lam)] = self.at(j, k, lam, nu);
                    }
                }
            }
        }
        HermitianForm::from_matrix(m).expect("flattened tensor is square and finite")
    }

    /// Σ Θ_{jk̄λν̄} · v^{jλ} · conj(v^{kν}) for an r×n fiber-tangent matrix v.
    pub fn form_value(&self, v: &CTensor) -> Result<f64> {
        if v.rows() != self.rank || v.cols() != self.base {
            return Err(Error::ShapeMismatch(format!(
                "tangent matrix {}x{} does not match tensor shape ({},{})",
                v.rows(),
                v.cols(),
                self.rank,
                self.base
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.rank {
            for k in 0..self.rank {
                for lam in 0..self.base {
                    for nu in 0..self.base {
                        acc += self.at(j, k, lam, nu) * v.at(j, lam) * v.at(k, nu).conj();
                    }
                }
            }
        }
        Ok(acc.re)
    }
}

/// Minimum-norm least-squares solution of A·x ≈ b via complex SVD; singular
/// values below rel_eps times the largest are treated as zero.
pub fn lstsq(a: &CMatrix, b: &CVector, rel_eps: f64) -> Result<CVector> {
    if a.nrows() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "matrix has {} rows but rhs has length {}",
            a.nrows(),
            b.len()
        )));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return Ok(CVector::zeros(a.ncols()));
    }
    svd.solve(b, rel_eps * smax)
        .map_err(|e| Error::LinearSolve(e.to_string()))
}

/// Nullspace basis from the reduced row echelon form: one vector per free
/// column, with a unit entry in that column. Deterministic and structured
/// (entries are ratios of the reduced rows).
pub fn rref_nullspace(a: &CMatrix, rel_tol: f64) -> Vec<CVector> {
    let (m, n) = a.shape();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return (0..n)
            .map(|j| {
                let mut x = CVector::zeros(n);
                x[j] = Complex64::new(1.0, 0.0);
                x
            })
            .collect();
    }
    let tol = rel_tol * scale;
    let mut r = a.clone();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut row = 0usize;
    for col in 0..n {
        if row >= m {
            break;
        }
        let (imax, vmax) = (row..m)
            .map(|i| (i, r[(i, col)].norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if vmax <= tol {
            continue;
        }
        r.swap_rows(row, imax);
        let piv = r[(row, col)];
        for c2 in col..n {
            r[(row, c2)] /= piv;
        }
        for i in 0..m {
            if i == row {
                continue;
            }
            let f = r[(i, col)];
            if f.norm() > 0.0 {
                for c2 in col..n {
                    let sub = f * r[(row, c2)];
                    r[(i, c2)] -= sub;
                }
                r[(i, col)] = Complex64::new(0.0, 0.0);
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    let mut basis = Vec::new();
    for fcol in 0..n {
        if pivot_cols.contains(&fcol) {
            continue;
        }
        let mut x = CVector::zeros(n);
        x[fcol] = Complex64::new(1.0, 0.0);
        for (ri, &pcol) in pivot_cols.iter().enumerate() {
            x[pcol] = -r[(ri, fcol)];
        }
        basis.push(x);
    }
    basis
}

/// Lower-triangular L with H = L·L† for a positive-definite H. Complex
/// square roots let the factorization "succeed" on indefinite input, so the
/// product is verified against H before returning.
pub fn cholesky_lower(h: &CMatrix) -> Result<CMatrix> {
    if h.nrows() != h.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "Cholesky input must be square, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let l = nalgebra::Cholesky::new(h.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::LinearSolve("matrix is not positive definite".into()))?;
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let err = (&l * l.adjoint() - h).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if err > 1e-10 * scale {
        return Err(Error::LinearSolve(
            "matrix is not positive definite (factor check failed)".into(),
        ));
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{random_ctensor, random_cvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_hermitian() -> HermitianForm {
        HermitianForm::new(
            3,
            &[
                c(2.0, 0.0),
                c(0.0, 1.0),
                c(0.5, -0.5),
                c(0.0, -1.0),
                c(3.0, 0.0),
                c(1.0, 0.0),
                c(0.5, 0.5),
                c(1.0, 0.0),
                c(1.0, 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn eigen_system_reconstructs_matrix() {
        let h = sample_hermitian();
        let (vals, vecs) = h.eigen_system();
        let mut recon = CMatrix::zeros(3, 3);
        for (lam, u) in vals.iter().zip(vecs.iter()) {
            recon += (u * u.adjoint()).scale(*lam);
        }
        let err: f64 = (h.matrix() - recon).iter().map(|z| z.norm()).sum();
        assert!(err < 1e-12, "reconstruction error {err}");
        assert!(vals.windows(2).all(|w| w[0] <= w[1]), "eigenvalues sorted");
        assert_eq!(vals[0], h.min_eigenvalue());
        assert_eq!(*vals.last().unwrap(), h.max_eigenvalue());
    }

    #[test]
    fn quadratic_form_is_real_and_matches_manual_sum() {
        let h = sample_hermitian();
        let v = [c(1.0, 2.0), c(0.0, -1.0), c(0.5, 0.5)];
        let mut manual = Complex64::new(0.0, 0.0);
        for j in 0..3 {
            for k in 0..3 {
                manual += v[j].conj() * h.entry(j, k) * v[k];
            }
        }
        assert!(manual.im.abs() < 1e-14);
        assert!((h.value(&v).unwrap() - manual.re).abs() < 1e-14);
    }

    #[test]
    fn symmetrization_enforces_hermitian_entries() {
        let raw = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.5), c(2.0, 1.0), c(0.0, 0.0), c(3.0, -0.5)]);
        let h = HermitianForm::from_matrix(raw).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let d = (h.entry(j, k) - h.entry(k, j).conj()).norm();
                assert!(d < 1e-15);
            }
        }
    }

    #[test]
    fn eps_rank_counts_significant_eigenvalues() {
        let h = HermitianForm::new(
            3,
            &[
                c(2.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1e-3, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1e-20, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(h.eps_rank(), 2);
        assert_eq!(HermitianForm::zeros(3).eps_rank(), 0);
    }

    #[test]
    fn pinv_quad_matches_inverse_on_full_rank_and_flags_null_leak() {
        let id = HermitianForm::identity(3);
        let v = CVector::from_column_slice(&[c(1.0, 1.0), c(0.0, 2.0), c(-1.0, 0.0)]);
        assert!((id.pinv_quad(&v).unwrap().expect_finite() - v.norm_squared()).abs() < 1e-12);

        let sing = HermitianForm::new(
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let in_range = CVector::from_column_slice(&[c(2.0, 0.0), c(0.0, 0.0)]);
        assert!((sing.pinv_quad(&in_range).unwrap().expect_finite() - 4.0).abs() < 1e-12);
        let leaking = CVector::from_column_slice(&[c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(sing.pinv_quad(&leaking).unwrap(), PinvLimit::Infinite);
    }

    #[test]
    fn gram_tensor_is_hermitian_psd_and_flatten_agrees_with_form_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (r, n) = (2usize, 3usize);
        let mut theta = NakanoTensor::zeros(r, n).unwrap();
        for _ in 0..4 {
            let a = random_ctensor(r, n, &mut rng);
            for j in 0..r {
                for k in 0..r {
                    for lam in 0..n {
                        for nu in 0..n {
                            theta.add_at(j, k, lam, nu, a.at(j, lam) * a.at(k, nu).conj());
                        }
                    }
                }
            }
        }
        assert!(theta.hermitian_defect() < 1e-13);
        let flat = theta.flatten();
        assert!(flat.min_eigenvalue() > -1e-12);

        let v = random_ctensor(r, n, &mut rng);
        let direct = theta.form_value(&v).unwrap();
        assert!(direct >= -1e-12);
        let mut vflat = Vec::with_capacity(r * n);
        for j in 0..r {
            for lam in 0..n {
                vflat.push(v.at(j, lam));
            }
        }
        assert!((direct - flat.value(&vflat).unwrap()).abs() < 1e-11 * (1.0 + direct.abs()));
    }

    #[test]
    fn tensor_product_with_identity_fiber_block_diagonalizes() {
        let w = HermitianForm::new(2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)]).unwrap();
        let mut t = NakanoTensor::zeros(2, 2).unwrap();
        t.add_scaled_product(&HermitianForm::identity(2), &w, 1.5).unwrap();
        let flat = t.flatten();
        for j in 0..2 {
            for lam in 0..2 {
                for nu in 0..2 {
                    let got = flat.entry(j * 2 + lam, j * 2 + nu);
                    let want = w.entry(nu, lam) * 1.5;
                    assert!((got - want).norm() < 1e-14);
                }
            }
        }
        assert!((flat.entry(0, 2).norm() + flat.entry(1, 3).norm()) < 1e-14);
    }

    #[test]
    fn lstsq_satisfies_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = CMatrix::from_fn(6, 3, |_, _| {
            let v = random_cvector(1, &mut rng);
            v[0]
        });
        let b = CVector::from_fn(6, |_, _| {
            let v = random_cvector(1, &mut rng);
            v[0]
        });
        let x = lstsq(&a, &b, 1e-12).unwrap();
        let residual = a.adjoint() * (&a * &x - &b);
        assert!(residual.norm() < 1e-10, "normal-equation residual {}", residual.norm());
    }

    #[test]
    fn rref_nullspace_returns_structured_basis() {
        let a = CMatrix::from_row_slice(
            2,
            3,
            &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        );
        let basis = rref_nullspace(&a, 1e-12);
        assert_eq!(basis.len(), 1);
        let x = &basis[0];
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-14, "unit entry at the free column");
        assert!((&a * x).norm() < 1e-13);

        let z = CMatrix::zeros(2, 3);
        assert_eq!(rref_nullspace(&z, 1e-12).len(), 3);
    }

    #[test]
    fn cholesky_factors_positive_definite_matrices_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let b = CMatrix::from_fn(3, 3, |_, _| {
            let v = random_cvector(1, &mut rng);
            v[0]
        });
        let h = &b * b.adjoint() + CMatrix::identity(3, 3).scale(0.1);
        let l = cholesky_lower(&h).unwrap();
        let err: f64 = (&l * l.adjoint() - &h).iter().map(|z| z.norm()).sum();
        assert!(err < 1e-12);
        for j in 0..3 {
            for k in (j + 1)..3 {
                assert_eq!(l[(j, k)], c(0.0, 0.0), "upper triangle is zero");
            }
        }

        let indefinite = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        assert!(cholesky_lower(&indefinite).is_err());
    }
}
