//! Polynomial expressions in z and conj(z) with exact mixed derivatives.
//!
//! A [`BiPoly`] is a finite sum of products A_i(z) * conj(B_i(z)) with both
//! factors holomorphic polynomials. Hermitian metrics built from holomorphic
//! frames live in this class, and the mixed Wirtinger derivatives that
//! curvature formulas need are exact: d/dz_l acts on the A factors and
//! d/dconj(z_v) on the conjugated B factors.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::MultiPoly;

/// Sum of products of a holomorphic polynomial and a conjugated one.
#[derive(Debug, Clone)]
pub struct BiPoly {
    nvars: usize,
    pairs: Vec<(MultiPoly, MultiPoly)>,
}

impl BiPoly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            pairs: Vec::new(),
        }
    }

    /// The product holo(z) * conj(anti(z)).
    pub fn from_pair(holo: &MultiPoly, anti: &MultiPoly) -> Result<Self> {
        if holo.nvars() != anti.nvars() {
            return Err(Error::ShapeMismatch(format!(
                "factors in {} and {} variables",
                holo.nvars(),
                anti.nvars()
            )));
        }
        let mut out = Self::zero(holo.nvars());
        out.push_pair(holo.clone(), anti.clone());
        Ok(out)
    }

    /// |p(z)|^2 as a BiPoly.
    pub fn norm_sq(poly: &MultiPoly) -> Self {
        Self::from_pair(poly, poly).expect("matching arity")
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn pairs(&self) -> &[(MultiPoly, MultiPoly)] {
        &self.pairs
    }

    fn push_pair(&mut self, holo: MultiPoly, anti: MultiPoly) {
        if !holo.is_zero() && !anti.is_zero() {
            self.pairs.push((holo, anti));
        }
    }

    fn check_arity(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::ShapeMismatch(format!(
                "expressions in {} and {} variables cannot be combined",
                self.nvars, other.nvars
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let mut out = self.clone();
        for (a, b) in &other.pairs {
            out.push_pair(a.clone(), b.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let minus_one = Complex64::new(-1.0, 0.0);
        let mut out = self.clone();
        for (a, b) in &other.pairs {
            out.push_pair(a.scale(minus_one), b.clone());
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let mut out = Self::zero(self.nvars);
        for (a1, b1) in &self.pairs {
            for (a2, b2) in &other.pairs {
                out.push_pair(a1.mul(a2)?, b1.mul(b2)?);
            }
        }
        Ok(out)
    }

    /// Multiplies the expression by the constant c (applied to the
    /// holomorphic factors).
    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (a, b) in &self.pairs {
            out.push_pair(a.scale(c), b.clone());
        }
        out
    }

    /// Multiplies the expression by conj(d) (applied to the conjugated
    /// factors). Together with [`BiPoly::scale`] this realizes constant frame
    /// changes c * conj(d) * self.
    pub fn scale_conj(&self, d: Complex64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (a, b) in &self.pairs {
            out.push_pair(a.clone(), b.scale(d));
        }
        out
    }

    /// Complex conjugate of the whole expression.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (a, b) in &self.pairs {
            out.push_pair(b.clone(), a.clone());
        }
        out
    }

    /// Holomorphic derivative d/dz_axis (acts on the A factors).
    pub fn partial_z(&self, axis: usize) -> Result<Self> {
        let mut out = Self::zero(self.nvars);
        for (a, b) in &self.pairs {
            out.push_pair(a.partial(axis)?, b.clone());
        }
        Ok(out)
    }

    /// Antiholomorphic derivative d/dconj(z_axis) (acts on the B factors,
    /// since d/dconj(z) conj(B) = conj(dB/dz)).
    pub fn partial_zbar(&self, axis: usize) -> Result<Self> {
        let mut out = Self::zero(self.nvars);
        for (a, b) in &self.pairs {
            out.push_pair(a.clone(), b.partial(axis)?);
        }
        Ok(out)
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in &self.pairs {
            acc += a.eval(z) * b.eval(z).conj();
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Mixed Wirtinger derivative d^2 f / dz_l dconj(z_v) by central
    /// differences on the four underlying real second derivatives.
    fn mixed_fd(
        f: &dyn Fn(&[Complex64]) -> Complex64,
        z: &[Complex64],
        l: usize,
        v: usize,
        h: f64,
    ) -> Complex64 {
        let shift = |dl: Complex64, dv: Complex64| {
            let mut w = z.to_vec();
            w[l] += dl;
            w[v] += dv;
            f(&w)
        };
        let mixed = |dl: Complex64, dv: Complex64| {
            (shift(dl, dv) - shift(dl, -dv) - shift(-dl, dv) + shift(-dl, -dv)) / (4.0 * h * h)
        };
        let re = c(h, 0.0);
        let im = c(0.0, h);
        let dxx = mixed(re, re);
        let dxy = mixed(re, im);
        let dyx = mixed(im, re);
        let dyy = mixed(im, im);
        0.25 * (dxx + c(0.0, 1.0) * dxy - c(0.0, 1.0) * dyx + dyy)
    }

    #[test]
    fn eval_matches_defining_product() {
        let a = MultiPoly::monomial(1, &[2], c(1.0, 1.0)).unwrap();
        let b = MultiPoly::monomial(1, &[1], c(0.0, -2.0)).unwrap();
        let e = BiPoly::from_pair(&a, &b).unwrap();
        let z = [c(0.5, -0.25)];
        let expect = a.eval(&z) * b.eval(&z).conj();
        assert!((e.eval(&z) - expect).norm() < 1e-15);
    }

    #[test]
    fn norm_sq_is_real_nonnegative() {
        let p = MultiPoly::from_terms(
            2,
            &[
                crate::poly::PolyTerm {
                    coeff: [1.0, 0.5],
                    exps: vec![1, 0],
                },
                crate::poly::PolyTerm {
                    coeff: [-0.3, 0.0],
                    exps: vec![0, 2],
                },
            ],
        )
        .unwrap();
        let sq = BiPoly::norm_sq(&p);
        let z = [c(0.4, 0.8), c(-0.2, 0.1)];
        let v = sq.eval(&z);
        assert!(v.im.abs() < 1e-15);
        assert!((v.re - p.eval(&z).norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn mixed_derivatives_match_finite_differences() {
        // H(z) = |z0|^2 * something mixed across variables
        let a = MultiPoly::from_terms(
            2,
            &[
                crate::poly::PolyTerm {
                    coeff: [1.0, 0.0],
                    exps: vec![2, 1],
                },
                crate::poly::PolyTerm {
                    coeff: [0.5, -1.0],
                    exps: vec![0, 1],
                },
            ],
        )
        .unwrap();
        let b = MultiPoly::from_terms(
            2,
            &[
                crate::poly::PolyTerm {
                    coeff: [1.0, 0.25],
                    exps: vec![1, 1],
                },
                crate::poly::PolyTerm {
                    coeff: [-0.75, 0.0],
                    exps: vec![0, 0],
                },
            ],
        )
        .unwrap();
        let e = BiPoly::from_pair(&a, &b).unwrap();
        let z = [c(0.3, -0.6), c(-0.5, 0.2)];
        for l in 0..2 {
            for v in 0..2 {
                let exact = e.partial_z(l).unwrap().partial_zbar(v).unwrap().eval(&z);
                let fd = mixed_fd(&|w| e.eval(w), &z, l, v, 1e-4);
                let scale = exact.norm().max(1.0);
                assert!(
                    (exact - fd).norm() < 1e-6 * scale,
                    "l={l} v={v}: exact {exact} fd {fd}"
                );
            }
        }
    }

    #[test]
    fn conjugation_swaps_factors() {
        let a = MultiPoly::monomial(1, &[1], c(2.0, 1.0)).unwrap();
        let b = MultiPoly::monomial(1, &[2], c(0.5, -0.5)).unwrap();
        let e = BiPoly::from_pair(&a, &b).unwrap();
        let z = [c(-0.7, 0.4)];
        assert!((e.conj().eval(&z) - e.eval(&z).conj()).norm() < 1e-15);
    }

    #[test]
    fn product_evaluates_pointwise() {
        let a = BiPoly::norm_sq(&MultiPoly::monomial(1, &[1], c(1.0, 0.0)).unwrap());
        let b = BiPoly::norm_sq(&MultiPoly::monomial(1, &[2], c(0.0, 1.0)).unwrap());
        let prod = a.mul(&b).unwrap();
        let z = [c(1.2, -0.3)];
        assert!((prod.eval(&z) - a.eval(&z) * b.eval(&z)).norm() < 1e-12);
    }

    #[test]
    fn constant_frame_scaling() {
        let a = MultiPoly::monomial(1, &[1], c(1.0, 0.0)).unwrap();
        let e = BiPoly::norm_sq(&a);
        let z = [c(0.9, 0.1)];
        let cc = c(0.6, -0.8);
        let d = c(-0.2, 0.4);
        let scaled = e.scale(cc).scale_conj(d);
        let expect = cc * d.conj() * e.eval(&z);
        assert!((scaled.eval(&z) - expect).norm() < 1e-15);
    }
}
