//! Cauchy-Schwarz inequalities for tensors.
//!
//! The basic inequality: for S, T in C^{r x n} (bilinear pairing convention)
//!
//! ```text
//! |sum_{l,k} s_{l,k} t_{l,k}|^2  <=  min(r,n) * sum_{m,l} |sum_k s_{m,k} t_{l,k}|^2
//! ```
//!
//! and its wedge variant: for a in C^p, b, c in C^{p x n}, with q = min(n, p-1),
//!
//! ```text
//! |sum_{j,l,k} conj(a_j) (a_j b_{l,k} - a_l b_{j,k}) c_{l,k}|^2
//!     <=  q ||a||^2 * sum_l sum_{m<j} |sum_k (a_m b_{j,k} - a_j b_{m,k}) c_{l,k}|^2
//! ```
//!
//! A unitary rotation sending a to ||a|| times the last basis vector collapses
//! the wedge variant to the basic one with r = p-1; [`reduce_wedge_to_tensor`]
//! performs that reduction explicitly.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tol;

/// Dense complex matrix with row-major storage, used both for the tensors in
/// the Cauchy-Schwarz checks and for gradient matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CTensor {
    /// Builds a tensor from row-major data, rejecting non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries for a {}x{} tensor, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!("tensor entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Entry-wise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Matrix product self * other.
    pub fn mat_mul(&self, other: &CTensor) -> Result<CTensor> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CTensor::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let lik = self.at(i, k);
                if lik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.at(i, j) + lik * other.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Largest entry magnitude; zero for empty tensors.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Outcome of one Cauchy-Schwarz check. `slack = factor * rhs - lhs`; the
/// inequality holds when the slack is no more negative than the mixed
/// absolute/relative tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsReport {
    pub lhs: f64,
    pub rhs: f64,
    pub factor: f64,
    pub slack: f64,
    pub holds: bool,
}

fn report_from(lhs: f64, rhs: f64, factor: f64) -> CsReport {
    let slack = factor * rhs - lhs;
    let holds = slack >= -(tol::CS_ABS + tol::CS_REL * factor * rhs);
    CsReport {
        lhs,
        rhs,
        factor,
        slack,
        holds,
    }
}

/// Checks the tensor Cauchy-Schwarz inequality in the bilinear convention:
/// `|sum s_{l,k} t_{l,k}|^2 <= min(r,n) * sum_{m,l} |sum_k s_{m,k} t_{l,k}|^2`.
pub fn cs_tensor_check(s: &CTensor, t: &CTensor) -> Result<CsReport> {
    if s.rows() != t.rows() || s.cols() != t.cols() {
        return Err(Error::ShapeMismatch(format!(
            "tensors must share a shape: {}x{} vs {}x{}",
            s.rows(),
            s.cols(),
            t.rows(),
            t.cols()
        )));
    }
    let (r, n) = (s.rows(), s.cols());
    let mut diag = Complex64::new(0.0, 0.0);
    for l in 0..r {
        for k in 0..n {
            diag += s.at(l, k) * t.at(l, k);
        }
    }
    let lhs = diag.norm_sqr();
    let mut rhs = 0.0;
    for m in 0..r {
        for l in 0..r {
            let mut cross = Complex64::new(0.0, 0.0);
            for k in 0..n {
                cross += s.at(m, k) * t.at(l, k);
            }
            rhs += cross.norm_sqr();
        }
    }
    Ok(report_from(lhs, rhs, r.min(n) as f64))
}

/// The sesquilinear form of the inequality, obtained by conjugating T.
pub fn cs_tensor_check_sesquilinear(s: &CTensor, t: &CTensor) -> Result<CsReport> {
    cs_tensor_check(s, &t.conj())
}

/// Checks the wedge variant of the inequality for a in C^p, b, c in C^{p x n}.
/// The factor is `q ||a||^2` with q = min(n, p-1).
pub fn cs_wedge_check(a: &[Complex64], b: &CTensor, c: &CTensor) -> Result<CsReport> {
    let p = a.len();
    let n = b.cols();
    if p < 2 {
        return Err(Error::InvalidArgument(
            "wedge check needs at least two components".into(),
        ));
    }
    if b.rows() != p || c.rows() != p || c.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "expected b and c of shape {}x{}, got {}x{} and {}x{}",
            p,
            n,
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    let mut inner = Complex64::new(0.0, 0.0);
    for j in 0..p {
        for l in 0..p {
            for k in 0..n {
                inner += a[j].conj() * (a[j] * b.at(l, k) - a[l] * b.at(j, k)) * c.at(l, k);
            }
        }
    }
    let lhs = inner.norm_sqr();
    let mut rhs = 0.0;
    for l in 0..p {
        for m in 0..p {
            for j in (m + 1)..p {
                let mut cross = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    cross += (a[m] * b.at(j, k) - a[j] * b.at(m, k)) * c.at(l, k);
                }
                rhs += cross.norm_sqr();
            }
        }
    }
    let q = n.min(p - 1) as f64;
    let norm_a_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    Ok(report_from(lhs, rhs, q * norm_a_sq))
}

/// Evaluates the two sesquilinear sums whose equality underlies the wedge
/// check: the pair-indexed sum over j < l and the skew-symmetrized full sum.
/// They agree identically; tests assert the numerical agreement.
pub fn skew_symmetrization_pair(
    a: &[Complex64],
    b: &CTensor,
    c: &CTensor,
) -> (Complex64, Complex64) {
    let p = a.len();
    let n = b.cols();
    let mut paired = Complex64::new(0.0, 0.0);
    for j in 0..p {
        for l in (j + 1)..p {
            for k in 0..n {
                let wedge_b = a[j] * b.at(l, k) - a[l] * b.at(j, k);
                let wedge_c = a[j] * c.at(l, k) - a[l] * c.at(j, k);
                paired += wedge_b * wedge_c.conj();
            }
        }
    }
    let mut full = Complex64::new(0.0, 0.0);
    for j in 0..p {
        for l in 0..p {
            for k in 0..n {
                full += (a[j] * b.at(l, k) - a[l] * b.at(j, k)) * (a[j] * c.at(l, k)).conj();
            }
        }
    }
    (paired, full)
}

/// Deterministic unitary U with `U a = ||a|| e_p` (last basis vector), built
/// from a Householder reflection followed by a phase correction.
pub fn unitary_to_last(a: &[Complex64]) -> Result<CTensor> {
    let p = a.len();
    let norm: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot rotate the zero vector".into(),
        ));
    }
    let u: Vec<Complex64> = a.iter().map(|z| z / norm).collect();
    let beta = u[p - 1];
    let mu = if beta.norm() > 0.0 {
        -beta / beta.norm()
    } else {
        Complex64::new(-1.0, 0.0)
    };
    let mut w = u.clone();
    w[p - 1] -= mu;
    let w_norm_sq: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    // H = I - 2 w w^dagger / ||w||^2 sends u to mu * e_p; the diagonal phase
    // conj(mu) on the last row then lands exactly on e_p.
    let mut out = CTensor::from_fn(p, p, |i, j| {
        let delta = if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        delta - 2.0 * w[i] * w[j].conj() / w_norm_sq
    });
    for j in 0..p {
        let v = out.at(p - 1, j) * mu.conj();
        out.set(p - 1, j, v);
    }
    Ok(out)
}

/// Result of collapsing the wedge data (a, b, c) to plain tensors of shape
/// (p-1) x n. `norm_a_sq` scales the collapsed quantities back: the wedge lhs
/// equals `norm_a_sq^2` times the tensor lhs, and, for the canonical
/// representative of c, the wedge rhs equals `norm_a_sq` times the tensor rhs.
#[derive(Debug, Clone)]
pub struct WedgeReduction {
    pub s: CTensor,
    pub t: CTensor,
    pub norm_a_sq: f64,
    /// The input c with its component along conj(a) removed. The wedge lhs
    /// never sees that component; the rhs only grows with it, so this is the
    /// representative on which the reduction is an exact identity.
    pub canonical_c: CTensor,
}

/// Removes from c the component along conj(a), so that the bilinear
/// contraction sum_l a_l c_{l,k} vanishes for every k.
pub fn canonical_wedge_datum(a: &[Complex64], c: &CTensor) -> CTensor {
    let p = a.len();
    let n = c.cols();
    let norm_a_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let mut out = c.clone();
    if norm_a_sq == 0.0 {
        return out;
    }
    for k in 0..n {
        let mut pairing = Complex64::new(0.0, 0.0);
        for l in 0..p {
            pairing += a[l] * c.at(l, k);
        }
        let coeff = pairing / norm_a_sq;
        for l in 0..p {
            let v = out.at(l, k) - a[l].conj() * coeff;
            out.set(l, k, v);
        }
    }
    out
}

/// Rotates a onto the last coordinate axis and collapses the wedge data to
/// (p-1) x n tensors S, T. With U the rotation, S is the negated first p-1
/// rows of U b and T the negated first p-1 rows of conj(U) c; the signs match
/// the wedge components paired with the last axis.
pub fn reduce_wedge_to_tensor(a: &[Complex64], b: &CTensor, c: &CTensor) -> Result<WedgeReduction> {
    let p = a.len();
    let n = b.cols();
    if p < 2 {
        return Err(Error::InvalidArgument(
            "reduction needs at least two components".into(),
        ));
    }
    if b.rows() != p || c.rows() != p || c.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "expected b and c of shape {}x{}, got {}x{} and {}x{}",
            p,
            n,
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    let unitary = unitary_to_last(a)?;
    let b_rot = unitary.mat_mul(b)?;
    let c_rot = unitary.conj().mat_mul(c)?;
    let s = CTensor::from_fn(p - 1, n, |j, k| -b_rot.at(j, k));
    let t = CTensor::from_fn(p - 1, n, |j, k| -c_rot.at(j, k));
    let norm_a_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    Ok(WedgeReduction {
        s,
        t,
        norm_a_sq,
        canonical_c: canonical_wedge_datum(a, c),
    })
}

/// Result of a tightness sweep for one tensor shape.
#[derive(Debug, Clone, Copy)]
pub struct TightnessReport {
    pub factor: f64,
    /// Ratio lhs/rhs attained by the diagonal 0/1 pattern S = T = [I | 0].
    pub identity_ratio: f64,
    /// Largest ratio seen across the identity pattern and the random trials.
    pub best_ratio: f64,
    pub trials: usize,
}

/// Searches for the largest lhs/rhs ratio over seeded random instances plus
/// the deterministic diagonal pattern, which attains the factor min(r,n).
pub fn tightness_search(r: usize, n: usize, trials: usize, seed: u64) -> Result<TightnessReport> {
    if r == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "tightness search needs positive dimensions".into(),
        ));
    }
    let identity = CTensor::from_fn(r, n, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let id_report = cs_tensor_check(&identity, &identity)?;
    let identity_ratio = id_report.lhs / id_report.rhs;
    let mut best_ratio = identity_ratio;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let s = random_ctensor(r, n, &mut rng);
        let t = random_ctensor(r, n, &mut rng);
        let report = cs_tensor_check(&s, &t)?;
        if report.rhs > 1e-100 {
            best_ratio = best_ratio.max(report.lhs / report.rhs);
        }
    }
    Ok(TightnessReport {
        factor: r.min(n) as f64,
        identity_ratio,
        best_ratio,
        trials,
    })
}

/// Random tensor with entries whose real and imaginary parts are uniform in
/// the centered unit square [-1, 1]^2.
pub fn random_ctensor(rows: usize, cols: usize, rng: &mut impl Rng) -> CTensor {
    CTensor::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
    })
}

/// Random complex vector with the same entry distribution.
pub fn random_cvector(len: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
        .collect()
}
