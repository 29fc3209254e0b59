//! Quadrature over polydiscs in ℂⁿ for weighted, possibly singular
//! densities: per-variable Gauss–Legendre nodes in r² composed with uniform
//! angular sampling, deterministic compensated summation, node-floor
//! skipping with reported mass, and refinement-based divergence detection.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::HermitianForm;
use crate::poly::MultiPoly;
use crate::tol;

/// Product of discs |zᵢ − cᵢ| < Rᵢ.
#[derive(Debug, Clone)]
pub struct Domain {
    radii: Vec<f64>,
    center: Vec<Complex64>,
}

impl Domain {
    pub fn polydisc(radii: Vec<f64>, center: Vec<Complex64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidArgument("domain needs at least one variable".into()));
        }
        if radii.len() != center.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} radii vs {} center coordinates",
                radii.len(),
                center.len()
            )));
        }
        if radii.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::InvalidArgument("radii must be positive and finite".into()));
        }
        if center
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("domain center must be finite".into()));
        }
        Ok(Self { radii, center })
    }

    /// Unit-centered disc product with the given radii.
    pub fn centered(radii: Vec<f64>) -> Result<Self> {
        let center = vec![Complex64::new(0.0, 0.0); radii.len()];
        Self::polydisc(radii, center)
    }

    pub fn nvars(&self) -> usize {
        self.radii.len()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn center(&self) -> &[Complex64] {
        &self.center
    }

    pub fn volume(&self) -> f64 {
        self.radii
            .iter()
            .map(|r| std::f64::consts::PI * r * r)
            .product()
    }
}

/// Standard Gauss–Legendre rule on [−1, 1]: (node, weight) pairs computed
/// by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    assert!(order >= 1, "quadrature order must be at least 1");
    let n = order as f64;
    (1..=order)
        .map(|k| {
            let mut x = (std::f64::consts::PI * (k as f64 - 0.25) / (n + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_value_deriv(order, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_value_deriv(order, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (x, w)
        })
        .collect()
}

fn legendre_value_deriv(order: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0f64;
    let mut cur = x;
    if order == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=order {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * cur - (kf - 1.0) * prev) / kf;
        prev = cur;
        cur = next;
    }
    let dp = order as f64 * (x * cur - prev) / (x * x - 1.0);
    (cur, dp)
}

/// Tensor-product grid over a polydisc. Per complex variable the radial
/// direction carries Gauss–Legendre nodes in s = r² on (0, R²] and the
/// angular direction uniform midpoints, so node weights sum to the domain
/// volume. Nodes are visited lazily in a fixed odometer order.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    domain: Domain,
    radial: usize,
    angular: usize,
    axis_nodes: Vec<Vec<(Complex64, f64)>>,
}

/// Grid with the given per-axis radial and angular counts.
pub fn build_grid(domain: &Domain, radial: usize, angular: usize) -> Result<QuadratureGrid> {
    if radial < 2 || angular < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs radial >= 2 and angular >= 2, got {radial}x{angular}"
        )));
    }
    let base_rule = gauss_legendre(radial);
    let mut axis_nodes = Vec::with_capacity(domain.nvars());
    for &r in domain.radii() {
        let r2 = r * r;
        let mut nodes = Vec::with_capacity(radial * angular);
        for &(x, w) in &base_rule {
            let s = (x + 1.0) * 0.5 * r2;
            let radius = s.sqrt();
            let w_radial = w * r2 * 0.5;
            for m in 0..angular {
                let theta =
                    2.0 * std::f64::consts::PI * (m as f64 + 0.5) / angular as f64;
                let offset = Complex64::from_polar(radius, theta);
                let weight = w_radial * 0.5 * (2.0 * std::f64::consts::PI / angular as f64);
                nodes.push((offset, weight));
            }
        }
        axis_nodes.push(nodes);
    }
    Ok(QuadratureGrid {
        domain: domain.clone(),
        radial,
        angular,
        axis_nodes,
    })
}

impl QuadratureGrid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn radial(&self) -> usize {
        self.radial
    }

    pub fn angular(&self) -> usize {
        self.angular
    }

    pub fn node_count(&self) -> usize {
        (self.radial * self.angular).pow(self.domain.nvars() as u32)
    }

    /// Exact sum of all node weights (a product over axes).
    pub fn sum_weights(&self) -> f64 {
        self.axis_nodes
            .iter()
            .map(|axis| axis.iter().map(|(_, w)| w).sum::<f64>())
            .product()
    }

    /// Visits every node in a fixed order (last axis fastest) without
    /// materializing the tensor product.
    pub fn for_each_node<F: FnMut(&[Complex64], f64)>(&self, mut f: F) {
        let n = self.domain.nvars();
        let per_axis = self.radial * self.angular;
        let total = per_axis.pow(n as u32);
        let mut index = vec![0usize; n];
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        for _ in 0..total {
            let mut weight = 1.0f64;
            for ax in 0..n {
                let (offset, w) = self.axis_nodes[ax][index[ax]];
                z[ax] = self.domain.center()[ax] + offset;
                weight *= w;
            }
            f(&z, weight);
            for ax in (0..n).rev() {
                index[ax] += 1;
                if index[ax] < per_axis {
                    break;
                }
                index[ax] = 0;
            }
        }
    }
}

/// Neumaier-compensated accumulator: deterministic for a fixed add order
/// and robust against cancellation between large node contributions.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Single-grid pass: (integral, skipped weight mass). The density returns
/// None at nodes it declares singular; their weight is recorded, never
/// averaged in.
pub fn integrate_on<F: FnMut(&[Complex64]) -> Option<f64>>(
    grid: &QuadratureGrid,
    mut density: F,
) -> (f64, f64) {
    let mut sum = CompensatedSum::new();
    let mut skipped = CompensatedSum::new();
    grid.for_each_node(|z, w| match density(z) {
        Some(v) => sum.add(v * w),
        None => skipped.add(w),
    });
    (sum.value(), skipped.value())
}

/// Outcome of a refinement-checked integral: the finest-level value, the
/// three level values (base, doubled, quadrupled resolution), the weight
/// mass skipped at the finest level, and the divergence flag.
#[derive(Debug, Clone)]
pub struct IntegralResult {
    pub value: f64,
    pub diverged: bool,
    pub levels: [f64; 3],
    pub skipped_mass: f64,
    pub node_count: usize,
}

/// Integrates on the grid and on two resolution doublings; flags divergence
/// when the value keeps growing geometrically (non-integrable power
/// singularities) or the refinement increments stop decaying
/// (logarithmic divergence).
pub fn integrate<F: FnMut(&[Complex64]) -> Option<f64>>(
    grid: &QuadratureGrid,
    mut density: F,
) -> Result<IntegralResult> {
    let mut levels = [0.0f64; 3];
    let mut skipped_mass = 0.0f64;
    let mut node_count = 0usize;
    for (i, mult) in [1usize, 2, 4].into_iter().enumerate() {
        let refined = build_grid(grid.domain(), grid.radial() * mult, grid.angular() * mult)?;
        let (value, skipped) = integrate_on(&refined, &mut density);
        levels[i] = value;
        if i == 2 {
            skipped_mass = skipped;
            node_count = refined.node_count();
        }
    }
    Ok(IntegralResult {
        value: levels[2],
        diverged: detect_divergence(&levels),
        levels,
        skipped_mass,
        node_count,
    })
}

fn detect_divergence(levels: &[f64; 3]) -> bool {
    let significance = tol::DIVERGENCE_SIGNIFICANCE * (1.0 + levels[2].abs());
    let geometric = levels[2].abs() >= tol::DIVERGENCE_GROWTH * levels[1].abs()
        && levels[2].abs() > significance;
    let d1 = levels[1] - levels[0];
    let d2 = levels[2] - levels[1];
    let stalled = d2.abs() >= tol::DIVERGENCE_INCREMENT_RATIO * d1.abs()
        && d2.abs() > significance;
    geometric || stalled
}

/// One logarithmic contribution κ·log(ε + |p(z)|²) to a plurisubharmonic
/// weight.
#[derive(Debug, Clone)]
pub struct LogTerm {
    pub kappa: f64,
    pub eps: f64,
    pub poly: MultiPoly,
}

/// Plurisubharmonic weight DSL: ψ(z) = c₀ + c₁·‖z‖² + Σᵢ κᵢ·log(εᵢ + |pᵢ(z)|²)
/// with c₁, κᵢ ≥ 0 and εᵢ > 0, so every term has a positive semidefinite
/// complex Hessian by construction.
#[derive(Debug, Clone)]
pub struct PshWeight {
    nvars: usize,
    c0: f64,
    c1: f64,
    logs: Vec<LogTerm>,
    log_grads: Vec<Vec<MultiPoly>>,
}

impl PshWeight {
    pub fn new(nvars: usize, c0: f64, c1: f64, logs: Vec<LogTerm>) -> Result<Self> {
        if nvars == 0 {
            return Err(Error::InvalidArgument("weight needs at least one variable".into()));
        }
        if !c0.is_finite() || !c1.is_finite() || c1 < 0.0 {
            return Err(Error::InvalidArgument(
                "weight needs finite c0 and finite c1 >= 0".into(),
            ));
        }
        for term in &logs {
            if !term.kappa.is_finite() || term.kappa < 0.0 {
                return Err(Error::InvalidArgument("log coefficients must be >= 0".into()));
            }
            if !term.eps.is_finite() || term.eps <= 0.0 {
                return Err(Error::InvalidArgument("log offsets must be > 0".into()));
            }
            if term.poly.nvars() != nvars {
                return Err(Error::ShapeMismatch(
                    "log-term polynomial arity does not match the weight".into(),
                ));
            }
        }
        let log_grads = logs
            .iter()
            .map(|t| {
                (0..nvars)
                    .map(|axis| t.poly.partial(axis))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            nvars,
            c0,
            c1,
            logs,
            log_grads,
        })
    }

    /// The zero weight (e^{−ψ} ≡ 1).
    pub fn flat(nvars: usize) -> Self {
        Self::new(nvars, 0.0, 0.0, Vec::new()).expect("flat weight is valid")
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, z: &[Complex64]) -> f64 {
        let norm2: f64 = z.iter().map(|w| w.norm_sqr()).sum();
        let mut value = self.c0 + self.c1 * norm2;
        for term in &self.logs {
            value += term.kappa * (term.eps + term.poly.eval(z).norm_sqr()).ln();
        }
        value
    }

    /// Complex Hessian ∂λ∂ν̄ψ at z: c₁·I plus, per log term,
    /// κ·ε·(∂λp)(conj ∂νp)/(ε + |p|²)² — a sum of PSD pieces.
    pub fn complex_hessian(&self, z: &[Complex64]) -> Result<HermitianForm> {
        let n = self.nvars;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for lam in 0..n {
            entries[lam * n + lam] += self.c1;
        }
        for (term, grads) in self.logs.iter().zip(self.log_grads.iter()) {
            let u = term.eps + term.poly.eval(z).norm_sqr();
            let factor = term.kappa * term.eps / (u * u);
            let dp: Vec<Complex64> = grads.iter().map(|g| g.eval(z)).collect();
            for lam in 0..n {
                for nu in 0..n {
                    entries[lam * n + nu] += dp[lam] * dp[nu].conj() * factor;
                }
            }
        }
        HermitianForm::new(n, &entries)
    }
}
