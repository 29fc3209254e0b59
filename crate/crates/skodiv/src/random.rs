//! Seeded instance generators for property sweeps: random polynomials,
//! generator systems, evaluation points, and kernel-constrained tangent
//! vectors. Everything is driven by an explicit ChaCha8 stream so sweeps
//! are reproducible from a single seed.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::poly::{exponents_up_to, MultiPoly};
use crate::system::GeneratorSystem;
use crate::tensor::CTensor;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex sample with Re, Im uniform in (−1, 1).
pub fn rand_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Point in ℂⁿ with each coordinate uniform in the centered square of the
/// given half-width.
pub fn rand_point(nvars: usize, half_width: f64, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..nvars)
        .map(|_| rand_complex(rng) * half_width)
        .collect()
}

/// Dense random polynomial with every exponent of total degree ≤ degree.
pub fn rand_poly(nvars: usize, degree: usize, rng: &mut impl Rng) -> MultiPoly {
    let mut p = MultiPoly::zero(nvars);
    for exps in exponents_up_to(nvars, degree) {
        let term = MultiPoly::monomial(nvars, &exps, rand_complex(rng))
            .expect("exponent arity matches nvars");
        p = p.add(&term).expect("same arity");
    }
    p
}

/// Random generator system with p generators of total degree ≤ degree.
/// The last generator gets its constant term nudged away from zero so the
/// system never degenerates to the all-zero case.
pub fn rand_gensys(
    nvars: usize,
    p: usize,
    degree: usize,
    rng: &mut impl Rng,
) -> GeneratorSystem {
    loop {
        let mut gens: Vec<MultiPoly> = (0..p).map(|_| rand_poly(nvars, degree, rng)).collect();
        let zero_exps = vec![0u32; nvars];
        let last = gens.last_mut().expect("p >= 1");
        let c0 = last.coeff(&zero_exps);
        if c0.norm() < 0.2 {
            let nudge = MultiPoly::constant(nvars, Complex64::new(0.3, 0.1));
            *last = last.add(&nudge).expect("same arity");
        }
        if let Ok(sys) = GeneratorSystem::new(gens) {
            return sys;
        }
    }
}

/// Random (system, point) pair with |g(z)|² bounded away from zero, for
/// sweeps that divide by |g|². Resamples the point a few times before
/// rebuilding the system.
pub fn rand_nonvanishing_instance(
    nvars: usize,
    p: usize,
    degree: usize,
    rng: &mut impl Rng,
) -> (GeneratorSystem, Vec<Complex64>) {
    loop {
        let sys = rand_gensys(nvars, p, degree, rng);
        for _ in 0..8 {
            let z = rand_point(nvars, 0.8, rng);
            if sys.gnorm2(&z) > 1e-3 {
                return (sys, z);
            }
        }
    }
}

/// Random p×n tangent matrix v with Σ_j g_j(z)·v[j,λ] = 0 for every λ,
/// built by projecting a random matrix onto the constraint per column.
pub fn rand_kernel_tangent(
    g_at_z: &[Complex64],
    nvars: usize,
    rng: &mut impl Rng,
) -> CTensor {
    let p = g_at_z.len();
    let gnorm2: f64 = g_at_z.iter().map(|g| g.norm_sqr()).sum();
    let mut v = CTensor::zeros(p, nvars);
    for lam in 0..nvars {
        let col: Vec<Complex64> = (0..p).map(|_| rand_complex(rng)).collect();
        let contraction: Complex64 = (0..p).map(|j| g_at_z[j] * col[j]).sum();
        for j in 0..p {
            let adjusted = col[j] - g_at_z[j].conj() * (contraction / gnorm2);
            v.set(j, lam, adjusted);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_reproducible_from_seed() {
        let mut r1 = rng_from_seed(42);
        let mut r2 = rng_from_seed(42);
        let p1 = rand_poly(2, 3, &mut r1);
        let p2 = rand_poly(2, 3, &mut r2);
        assert_eq!(p1.to_terms().len(), p2.to_terms().len());
        let z = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.4)];
        assert_eq!(p1.eval(&z), p2.eval(&z));
    }

    #[test]
    fn nonvanishing_instance_avoids_common_zeros() {
        let mut rng = rng_from_seed(7);
        for _ in 0..20 {
            let (sys, z) = rand_nonvanishing_instance(2, 3, 2, &mut rng);
            assert!(sys.gnorm2(&z) > 1e-3);
        }
    }

    #[test]
    fn kernel_tangent_satisfies_constraint() {
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let (sys, z) = rand_nonvanishing_instance(2, 3, 2, &mut rng);
            let g = sys.eval_all(&z);
            let v = rand_kernel_tangent(&g, 2, &mut rng);
            for lam in 0..2 {
                let s: Complex64 = (0..3).map(|j| g[j] * v.at(j, lam)).sum();
                assert!(s.norm() < 1e-12, "contraction residual {}", s.norm());
            }
        }
    }
}
