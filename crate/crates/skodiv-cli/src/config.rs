//! Config file schema and its resolution into library problems.
//!
//! Every field is optional; each command resolves the subset it needs,
//! applying documented defaults.  The resolved values (including defaults)
//! are echoed back into the emitted report.

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use skodiv::division::{DivisionProblem, DivisionVariant};
use skodiv::poly::{MultiPoly, PolyTerm};
use skodiv::quadrature::{Domain, LogTerm, PshWeight};
use skodiv::system::GeneratorSystem;
use skodiv::Complex64;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Generator polynomials, each a list of term literals.
    pub generators: Option<Vec<Vec<PolyTerm>>>,
    /// Dividend polynomial as a list of term literals.
    pub f: Option<Vec<PolyTerm>>,
    pub gamma: Option<f64>,
    pub psi: Option<WeightSpec>,
    /// Extra plurisubharmonic twist, used by division variant b.
    pub phi: Option<WeightSpec>,
    pub domain: Option<DomainSpec>,
    pub grid: Option<GridSpec>,
    /// Ansatz degree for division solutions.
    pub degree: Option<usize>,
    pub variant: Option<DivisionVariant>,
    pub sweep: Option<SweepSpec>,
    pub seed: Option<u64>,
    /// Per-stage degree cost for iterated division.
    pub m0_budget: Option<usize>,
    /// Degree floor at which iterated division stops.
    pub n0: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Weight DSL literal: ψ(z) = c0 + c1·‖z‖² + Σ κᵢ·log(εᵢ + |pᵢ(z)|²).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub logs: Vec<LogSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSpec {
    pub kappa: f64,
    pub eps: f64,
    pub poly: Vec<PolyTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub radii: Vec<f64>,
    /// Disc centers as [re, im] pairs; defaults to the origin.
    #[serde(default)]
    pub center: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub radial: usize,
    pub angular: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            radial: 64,
            angular: 64,
        }
    }
}

/// Bounds for the randomized sweep commands.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub count: Option<usize>,
    /// Upper bound on the first tensor dimension (or generator count).
    pub max_rank: Option<usize>,
    /// Upper bound on the base-dimension n.
    pub max_base: Option<usize>,
    /// Upper bound on random polynomial degrees.
    pub max_degree: Option<usize>,
}

pub fn poly_from_terms(terms: &[PolyTerm], what: &str) -> anyhow::Result<MultiPoly> {
    let nvars = terms
        .first()
        .map(|t| t.exps.len())
        .ok_or_else(|| anyhow!("{what} needs at least one term"))?;
    MultiPoly::from_terms(nvars, terms).map_err(|e| anyhow!("{what}: {e}"))
}

pub fn build_system(cfg: &RunConfig) -> anyhow::Result<GeneratorSystem> {
    let gens = cfg
        .generators
        .as_ref()
        .ok_or_else(|| anyhow!("config needs a `generators` list for this command"))?;
    let polys = gens
        .iter()
        .enumerate()
        .map(|(i, terms)| poly_from_terms(terms, &format!("generator {i}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    GeneratorSystem::new(polys).map_err(|e| anyhow!("generators: {e}"))
}

pub fn build_dividend(cfg: &RunConfig, nvars: usize) -> anyhow::Result<MultiPoly> {
    match &cfg.f {
        None => bail!("config needs an `f` polynomial for this command"),
        Some(terms) if terms.is_empty() => Ok(MultiPoly::zero(nvars)),
        Some(terms) => poly_from_terms(terms, "f"),
    }
}

pub fn build_weight(spec: Option<&WeightSpec>, nvars: usize, what: &str) -> anyhow::Result<PshWeight> {
    let Some(spec) = spec else {
        return Ok(PshWeight::flat(nvars));
    };
    let logs = spec
        .logs
        .iter()
        .enumerate()
        .map(|(i, l)| {
            Ok(LogTerm {
                kappa: l.kappa,
                eps: l.eps,
                poly: poly_from_terms(&l.poly, &format!("{what} log term {i}"))?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    PshWeight::new(nvars, spec.c0, spec.c1, logs).map_err(|e| anyhow!("{what}: {e}"))
}

pub fn build_domain(spec: Option<&DomainSpec>, nvars: usize) -> anyhow::Result<Domain> {
    let Some(spec) = spec else {
        return Ok(Domain::centered(vec![1.0; nvars])?);
    };
    let center = if spec.center.is_empty() {
        vec![Complex64::new(0.0, 0.0); spec.radii.len()]
    } else {
        spec.center
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect()
    };
    Ok(Domain::polydisc(spec.radii.clone(), center)?)
}

/// Everything a division run needs, resolved with defaults.
pub struct ResolvedDivision {
    pub problem: DivisionProblem,
    pub grid: GridSpec,
    pub degree: usize,
    pub gamma: f64,
    pub variant: DivisionVariant,
}

pub fn build_division(cfg: &RunConfig) -> anyhow::Result<ResolvedDivision> {
    let sys = build_system(cfg)?;
    let nvars = sys.nvars();
    let f = build_dividend(cfg, nvars)?;
    let gamma = cfg.gamma.unwrap_or(1.0);
    let psi = build_weight(cfg.psi.as_ref(), nvars, "psi")?;
    let variant = cfg.variant.unwrap_or(DivisionVariant::Skoda);
    let phi = match (variant, cfg.phi.as_ref()) {
        (DivisionVariant::B, spec) => Some(build_weight(spec, nvars, "phi")?),
        (_, Some(_)) => bail!("config field `phi` is only meaningful for variant b"),
        _ => None,
    };
    let domain = build_domain(cfg.domain.as_ref(), nvars)?;
    let grid = cfg.grid.unwrap_or_default();
    let degree = cfg.degree.or_else(|| f.degree()).unwrap_or(0);
    let problem = DivisionProblem::new(
        sys,
        f,
        gamma,
        psi,
        phi,
        domain,
        grid.radial,
        grid.angular,
        degree,
        variant,
    )?;
    Ok(ResolvedDivision {
        problem,
        grid,
        degree,
        gamma,
        variant,
    })
}
