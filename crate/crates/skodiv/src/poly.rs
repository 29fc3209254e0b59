//! Sparse multivariate polynomials over the complex numbers.
//!
//! A [`MultiPoly`] in n variables maps exponent multi-indices to complex
//! coefficients. Coefficients are floating complex numbers; exponent
//! arithmetic is exact. Iteration order over terms is the lexicographic order
//! of the exponent vectors, which keeps every downstream computation
//! deterministic.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term of a polynomial literal: coefficient as [re, im] plus one
/// exponent per variable. This is the exchange format used by config files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub coeff: [f64; 2],
    pub exps: Vec<u32>,
}

/// Sparse polynomial in `nvars` complex variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl MultiPoly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, value: Complex64) -> Self {
        let mut poly = Self::zero(nvars);
        poly.add_term(&vec![0; nvars], value);
        poly
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Complex64::new(1.0, 0.0))
    }

    /// The monomial coeff * z^exps.
    pub fn monomial(nvars: usize, exps: &[u32], coeff: Complex64) -> Result<Self> {
        if exps.len() != nvars {
            return Err(Error::ShapeMismatch(format!(
                "monomial exponent vector has length {}, expected {}",
                exps.len(),
                nvars
            )));
        }
        let mut poly = Self::zero(nvars);
        poly.add_term(exps, coeff);
        Ok(poly)
    }

    /// Builds a polynomial from literal terms, validating arity and finiteness.
    pub fn from_terms(nvars: usize, terms: &[PolyTerm]) -> Result<Self> {
        let mut poly = Self::zero(nvars);
        for term in terms {
            if term.exps.len() != nvars {
                return Err(Error::ShapeMismatch(format!(
                    "term exponent vector has length {}, expected {}",
                    term.exps.len(),
                    nvars
                )));
            }
            let coeff = Complex64::new(term.coeff[0], term.coeff[1]);
            if !coeff.re.is_finite() || !coeff.im.is_finite() {
                return Err(Error::NonFinite(format!("coefficient {coeff}")));
            }
            poly.add_term(&term.exps, coeff);
        }
        Ok(poly)
    }

    /// Literal-term view in deterministic (lexicographic) order.
    pub fn to_terms(&self) -> Vec<PolyTerm> {
        self.terms
            .iter()
            .map(|(exps, coeff)| PolyTerm {
                coeff: [coeff.re, coeff.im],
                exps: exps.clone(),
            })
            .collect()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree, or None for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms
            .keys()
            .map(|exps| exps.iter().map(|&e| e as usize).sum())
            .max()
    }

    /// Largest coefficient magnitude (zero for the zero polynomial).
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[u32]) -> Complex64 {
        self.terms
            .get(exps)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    fn add_term(&mut self, exps: &[u32], coeff: Complex64) {
        if coeff == Complex64::new(0.0, 0.0) {
            return;
        }
        let entry = self
            .terms
            .entry(exps.to_vec())
            .or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff;
        if *entry == Complex64::new(0.0, 0.0) {
            self.terms.remove(exps);
        }
    }

    fn check_arity(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::ShapeMismatch(format!(
                "polynomials in {} and {} variables cannot be combined",
                self.nvars, other.nvars
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let mut out = self.clone();
        for (exps, coeff) in &other.terms {
            out.add_term(exps, *coeff);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let mut out = self.clone();
        for (exps, coeff) in &other.terms {
            out.add_term(exps, -coeff);
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_arity(other)?;
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.add_term(&exps, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (exps, coeff) in &self.terms {
            out.add_term(exps, coeff * factor);
        }
        out
    }

    /// Holomorphic partial derivative along the given variable.
    pub fn partial(&self, axis: usize) -> Result<Self> {
        if axis >= self.nvars {
            return Err(Error::AxisOutOfRange {
                axis,
                nvars: self.nvars,
            });
        }
        let mut out = Self::zero(self.nvars);
        for (exps, coeff) in &self.terms {
            let e = exps[axis];
            if e == 0 {
                continue;
            }
            let mut lowered = exps.clone();
            lowered[axis] = e - 1;
            out.add_term(&lowered, coeff * f64::from(e));
        }
        Ok(out)
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(
            z.len(),
            self.nvars,
            "evaluation point has wrong dimension: {} vs {}",
            z.len(),
            self.nvars
        );
        let mut acc = Complex64::new(0.0, 0.0);
        for (exps, coeff) in &self.terms {
            let mut term = *coeff;
            for (zi, &e) in z.iter().zip(exps) {
                if e > 0 {
                    term *= zi.powu(e);
                }
            }
            acc += term;
        }
        acc
    }

    /// Evaluation against a precomputed power table: `powers[i][e] = z_i^e`.
    /// Used in quadrature loops where many polynomials share one node.
    pub fn eval_with_powers(&self, powers: &[Vec<Complex64>]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (exps, coeff) in &self.terms {
            let mut term = *coeff;
            for (axis, &e) in exps.iter().enumerate() {
                if e > 0 {
                    term *= powers[axis][e as usize];
                }
            }
            acc += term;
        }
        acc
    }

    /// Largest exponent appearing on the given variable.
    pub fn max_exponent(&self, axis: usize) -> u32 {
        self.terms
            .keys()
            .map(|exps| exps.get(axis).copied().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }
}

/// Power table for [`MultiPoly::eval_with_powers`]: `table[i][e] = z_i^e`
/// for e up to and including `max_exponent`.
pub fn power_table(z: &[Complex64], max_exponent: usize) -> Vec<Vec<Complex64>> {
    z.iter()
        .map(|zi| {
            let mut row = Vec::with_capacity(max_exponent + 1);
            row.push(Complex64::new(1.0, 0.0));
            for e in 1..=max_exponent {
                let prev = row[e - 1];
                row.push(prev * zi);
            }
            row
        })
        .collect()
}

/// Enumerates all exponent vectors in n variables of total degree at most d,
/// in lexicographic order. This fixes the column order of every coefficient
/// matrix in the division module.
pub fn exponents_up_to(nvars: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; nvars];
    loop {
        let total: usize = current.iter().map(|&e| e as usize).sum();
        if total <= degree {
            out.push(current.clone());
        }
        // lexicographic successor within the degree box
        let mut axis = nvars;
        loop {
            if axis == 0 {
                out.sort();
                return out;
            }
            axis -= 1;
            if (current[axis] as usize) < degree {
                current[axis] += 1;
                for later in current.iter_mut().skip(axis + 1) {
                    *later = 0;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zvec(vals: &[(f64, f64)]) -> Vec<Complex64> {
        vals.iter().map(|&(re, im)| c(re, im)).collect()
    }

    #[test]
    fn monomial_evaluates() {
        let p = MultiPoly::monomial(2, &[2, 1], c(3.0, 0.0)).unwrap();
        let z = zvec(&[(2.0, 0.0), (0.0, 1.0)]);
        assert_eq!(p.eval(&z), c(0.0, 12.0));
    }

    #[test]
    fn partial_derivative_lowers_exponent() {
        // d/dz0 (3 z0^2 z1) = 6 z0 z1
        let p = MultiPoly::monomial(2, &[2, 1], c(3.0, 0.0)).unwrap();
        let dp = p.partial(0).unwrap();
        let expect = MultiPoly::monomial(2, &[1, 1], c(6.0, 0.0)).unwrap();
        assert_eq!(dp, expect);
        assert!(matches!(
            p.partial(2),
            Err(Error::AxisOutOfRange { axis: 2, nvars: 2 })
        ));
    }

    #[test]
    fn cancellation_removes_terms() {
        let p = MultiPoly::monomial(1, &[3], c(1.0, 0.0)).unwrap();
        let q = p.sub(&p).unwrap();
        assert!(q.is_zero());
        assert_eq!(q.degree(), None);
    }

    #[test]
    fn arity_mismatch_rejected() {
        let p = MultiPoly::one(1);
        let q = MultiPoly::one(2);
        assert!(matches!(p.add(&q), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn exponent_enumeration_counts_binomials() {
        // #(exps in n vars, total degree <= d) = C(n + d, n)
        assert_eq!(exponents_up_to(1, 4).len(), 5);
        assert_eq!(exponents_up_to(2, 3).len(), 10);
        assert_eq!(exponents_up_to(3, 2).len(), 10);
        let exps = exponents_up_to(2, 1);
        assert_eq!(exps, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn power_table_matches_eval() {
        let p = MultiPoly::from_terms(
            2,
            &[
                PolyTerm {
                    coeff: [1.5, -0.5],
                    exps: vec![3, 0],
                },
                PolyTerm {
                    coeff: [0.0, 2.0],
                    exps: vec![1, 2],
                },
            ],
        )
        .unwrap();
        let z = zvec(&[(0.3, 0.7), (-1.1, 0.2)]);
        let table = power_table(&z, 3);
        assert!((p.eval(&z) - p.eval_with_powers(&table)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn ring_laws_and_eval_homomorphism(
            coeffs_a in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64, 0u32..4, 0u32..4), 1..5),
            coeffs_b in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64, 0u32..4, 0u32..4), 1..5),
            zre in -2.0..2.0f64, zim in -2.0..2.0f64,
            wre in -2.0..2.0f64, wim in -2.0..2.0f64,
        ) {
            let build = |terms: &[(f64, f64, u32, u32)]| {
                let mut p = MultiPoly::zero(2);
                for &(re, im, e0, e1) in terms {
                    p = p.add(&MultiPoly::monomial(2, &[e0, e1], c(re, im)).unwrap()).unwrap();
                }
                p
            };
            let a = build(&coeffs_a);
            let b = build(&coeffs_b);
            let z = zvec(&[(zre, zim), (wre, wim)]);

            let sum = a.add(&b).unwrap();
            let prod = a.mul(&b).unwrap();
            prop_assert!((sum.eval(&z) - (a.eval(&z) + b.eval(&z))).norm() < 1e-9);
            prop_assert!((prod.eval(&z) - a.eval(&z) * b.eval(&z)).norm() < 1e-9);
            // commutativity up to accumulation order of per-exponent sums
            let comm = prod.sub(&b.mul(&a).unwrap()).unwrap();
            prop_assert!(comm.max_coeff_norm() <= 1e-13 * (1.0 + prod.max_coeff_norm()));
            // product rule for the holomorphic partial
            let d_prod = prod.partial(0).unwrap();
            let leibniz = a.partial(0).unwrap().mul(&b).unwrap()
                .add(&a.mul(&b.partial(0).unwrap()).unwrap()).unwrap();
            let diff = d_prod.sub(&leibniz).unwrap();
            prop_assert!(diff.max_coeff_norm() < 1e-9);
        }
    }
}
