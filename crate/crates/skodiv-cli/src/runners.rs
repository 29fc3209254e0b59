//! One runner per subcommand.  Each consumes the (partially filled) config,
//! resolves defaults, executes the checks, and emits a [`Report`].

use anyhow::anyhow;
use rand::Rng;
use serde_json::json;
use skodiv::bundle::{
    fiber_trace_identity_residual, kernel_frame, nakano_form_kernel_closed,
    nakano_form_kernel_frame, twisted_domination, variant_inequality_check, Variant,
};
use skodiv::division::{
    iterated_division, skoda_divide, variant_divide, DivisionSolution, DivisionVariant,
};
use skodiv::poly::MultiPoly;
use skodiv::random::{
    rand_kernel_tangent, rand_nonvanishing_instance, rand_poly, rng_from_seed,
};
use skodiv::system::GeneratorSystem;
use skodiv::tensor::{
    cs_tensor_check, cs_tensor_check_sesquilinear, cs_wedge_check, random_ctensor,
    random_cvector, reduce_wedge_to_tensor, skew_symmetrization_pair, tightness_search,
};
use skodiv::{tol, Error};

use crate::config::{build_division, build_dividend, build_system, RunConfig};
use crate::report::{Check, Report};

const TIGHTNESS_ABS: f64 = 1e-9;
const NONPOSITIVITY_ABS: f64 = 1e-12;
const HAND_CASE_ABS: f64 = 1e-10;

fn sweep_count(cfg: &RunConfig, default: usize) -> usize {
    cfg.sweep.and_then(|s| s.count).unwrap_or(default)
}

fn sweep_bound(bound: Option<usize>, default: usize) -> usize {
    bound.unwrap_or(default).max(1)
}

/// Random tensor Cauchy–Schwarz sweep in both pairing conventions, plus the
/// tightness of the diagonal pattern for every shape.
pub fn run_cs_sweep(cfg: &RunConfig, seed: u64) -> anyhow::Result<Report> {
    let count = sweep_count(cfg, 10_000);
    let max_rank = sweep_bound(cfg.sweep.and_then(|s| s.max_rank), 6);
    let max_base = sweep_bound(cfg.sweep.and_then(|s| s.max_base), 6);
    let mut report = Report::new("cs-sweep", seed);
    report.parameter("count", count as u64);
    report.parameter("max_rank", max_rank as u64);
    report.parameter("max_base", max_base as u64);
    report.tolerance("cs_abs", tol::CS_ABS);
    report.tolerance("cs_rel", tol::CS_REL);
    report.tolerance("tightness_abs", TIGHTNESS_ABS);

    let mut rng = rng_from_seed(seed);
    let mut failures = 0usize;
    let mut sesq_failures = 0usize;
    let mut min_slack = f64::INFINITY;
    for _ in 0..count {
        let r = rng.gen_range(1..=max_rank);
        let n = rng.gen_range(1..=max_base);
        let s = random_ctensor(r, n, &mut rng);
        let t = random_ctensor(r, n, &mut rng);
        let bil = cs_tensor_check(&s, &t)?;
        let sesq = cs_tensor_check_sesquilinear(&s, &t)?;
        failures += usize::from(!bil.holds);
        sesq_failures += usize::from(!sesq.holds);
        min_slack = min_slack.min(bil.slack).min(sesq.slack);
    }
    report.push(
        Check::new("bilinear_inequality", failures == 0)
            .with("checked", count as u64)
            .with("failures", failures as u64)
            .with("min_slack", min_slack),
    );
    report.push(
        Check::new("sesquilinear_inequality", sesq_failures == 0)
            .with("checked", count as u64)
            .with("failures", sesq_failures as u64),
    );

    let mut worst_identity = 0.0f64;
    let mut worst_excess = 0.0f64;
    for r in 1..=max_rank {
        for n in 1..=max_base {
            let tight = tightness_search(r, n, 40, seed ^ ((r * 31 + n) as u64))?;
            worst_identity = worst_identity.max((tight.identity_ratio - tight.factor).abs());
            worst_excess = worst_excess.max(tight.best_ratio - tight.factor);
        }
    }
    report.push(
        Check::new(
            "tightness_attained",
            worst_identity <= TIGHTNESS_ABS && worst_excess <= TIGHTNESS_ABS,
        )
        .with("max_identity_defect", worst_identity)
        .with("max_ratio_excess", worst_excess),
    );
    Ok(report)
}

/// Random wedge-pairing sweep: the inequality itself, agreement between the
/// direct and reduced-to-tensor computations, and the skew-symmetrization
/// identity.
pub fn run_wedge_sweep(cfg: &RunConfig, seed: u64) -> anyhow::Result<Report> {
    let count = sweep_count(cfg, 1_000);
    let max_rank = sweep_bound(cfg.sweep.and_then(|s| s.max_rank), 5).max(2);
    let max_base = sweep_bound(cfg.sweep.and_then(|s| s.max_base), 4);
    let mut report = Report::new("wedge-sweep", seed);
    report.parameter("count", count as u64);
    report.parameter("max_rank", max_rank as u64);
    report.parameter("max_base", max_base as u64);
    report.tolerance("cs_abs", tol::CS_ABS);
    report.tolerance("cs_rel", tol::CS_REL);
    report.tolerance("wedge_reduction_rel", tol::WEDGE_REDUCTION_REL);

    let mut rng = rng_from_seed(seed);
    let mut failures = 0usize;
    let mut max_lhs_diff = 0.0f64;
    let mut max_rhs_diff = 0.0f64;
    let mut max_skew_diff = 0.0f64;
    for _ in 0..count {
        let p = rng.gen_range(2..=max_rank);
        let n = rng.gen_range(1..=max_base);
        let a = random_cvector(p, &mut rng);
        let b = random_ctensor(p, n, &mut rng);
        let c = random_ctensor(p, n, &mut rng);
        let wedge = cs_wedge_check(&a, &b, &c)?;
        failures += usize::from(!wedge.holds);

        let red = reduce_wedge_to_tensor(&a, &b, &c)?;
        let tensor = cs_tensor_check(&red.s, &red.t)?;
        let canon = cs_wedge_check(&a, &b, &red.canonical_c)?;
        max_lhs_diff =
            max_lhs_diff.max(skodiv::rel_diff(wedge.lhs, red.norm_a_sq.powi(2) * tensor.lhs));
        max_rhs_diff =
            max_rhs_diff.max(skodiv::rel_diff(canon.rhs, red.norm_a_sq * tensor.rhs));

        let (paired, full) = skew_symmetrization_pair(&a, &b, &c);
        let scale = paired.norm().max(full.norm()).max(1.0);
        max_skew_diff = max_skew_diff.max((paired - full).norm() / scale);
    }
    report.push(
        Check::new("wedge_inequality", failures == 0)
            .with("checked", count as u64)
            .with("failures", failures as u64),
    );
    report.push(
        Check::new(
            "reduction_agreement",
            max_lhs_diff <= tol::WEDGE_REDUCTION_REL && max_rhs_diff <= tol::WEDGE_REDUCTION_REL,
        )
        .with("max_lhs_rel_diff", max_lhs_diff)
        .with("max_rhs_rel_diff", max_rhs_diff),
    );
    report.push(
        Check::new("skew_symmetrization", max_skew_diff <= tol::WEDGE_REDUCTION_REL)
            .with("max_rel_diff", max_skew_diff),
    );
    Ok(report)
}

fn random_geometry(
    rng: &mut impl Rng,
    max_base: usize,
    max_gens: usize,
    max_degree: usize,
) -> (GeneratorSystem, Vec<skodiv::Complex64>) {
    let nvars = rng.gen_range(1..=max_base);
    let p = rng.gen_range(2..=max_gens.max(2));
    rand_nonvanishing_instance(nvars, p, max_degree, rng)
}

/// Verifies the kernel-subbundle curvature along both routes — the frame
/// formula and the contraction closed form — and its nonpositivity.
pub fn run_curvature_verify(cfg: &RunConfig, seed: u64) -> anyhow::Result<Report> {
    let count = sweep_count(cfg, 120);
    let max_base = sweep_bound(cfg.sweep.and_then(|s| s.max_base), 3);
    let max_gens = sweep_bound(cfg.sweep.and_then(|s| s.max_rank), 3);
    let max_degree = sweep_bound(cfg.sweep.and_then(|s| s.max_degree), 3);
    let mut report = Report::new("curvature-verify", seed);
    report.parameter("count", count as u64);
    report.parameter("max_base", max_base as u64);
    report.parameter("max_generators", max_gens as u64);
    report.parameter("max_degree", max_degree as u64);
    report.tolerance("curvature_routes_rel", tol::CURVATURE_ROUTES_REL);
    report.tolerance("nonpositivity_abs", NONPOSITIVITY_ABS);

    let mut rng = rng_from_seed(seed);
    let mut max_route_diff = 0.0f64;
    let mut max_value = f64::NEG_INFINITY;
    for _ in 0..count {
        let (sys, z) = random_geometry(&mut rng, max_base, max_gens, max_degree);
        let g = sys.eval_all(&z);
        let v_amb = rand_kernel_tangent(&g, sys.nvars(), &mut rng);
        let closed = nakano_form_kernel_closed(&sys, &z, &v_amb)?;
        let frame = kernel_frame(&sys, &z)?;
        let v_frame = frame.frame_from_ambient(&sys, &v_amb, &z)?;
        let by_frame = nakano_form_kernel_frame(&sys, &z, &v_frame)?;
        max_route_diff = max_route_diff.max((closed - by_frame).abs() / (1.0 + closed.abs()));
        max_value = max_value.max(closed).max(by_frame);
    }
    report.push(
        Check::new("routes_agree", max_route_diff <= tol::CURVATURE_ROUTES_REL)
            .with("checked", count as u64)
            .with("max_rel_diff", max_route_diff),
    );
    report.push(
        Check::new("nonpositive", max_value <= NONPOSITIVITY_ABS).with("max_value", max_value),
    );
    Ok(report)
}

/// Twisted-curvature domination sweep over γ ∈ {q, q+1/2, q+1}, plus the
/// flat two-generator case whose domination form vanishes identically.
pub fn run_dominate(cfg: &RunConfig, seed: u64) -> anyhow::Result<Report> {
    let count = sweep_count(cfg, 60);
    let max_base = sweep_bound(cfg.sweep.and_then(|s| s.max_base), 3);
    let max_gens = sweep_bound(cfg.sweep.and_then(|s| s.max_rank), 3);
    let max_degree = sweep_bound(cfg.sweep.and_then(|s| s.max_degree), 3);
    let mut report = Report::new("dominate", seed);
    report.parameter("count", count as u64);
    report.tolerance("domination_rel", tol::DOMINATION_REL);
    report.tolerance("hand_case_abs", HAND_CASE_ABS);

    let mut rng = rng_from_seed(seed);
    let mut min_eig_rel = f64::INFINITY;
    for _ in 0..count {
        let (sys, z) = random_geometry(&mut rng, max_base, max_gens, max_degree);
        let q = sys.q() as f64;
        for dg in [0.0, 0.5, 1.0] {
            let m = twisted_domination(&sys, &z, q + dg)?;
            let scale = 1.0 + m.max_entry_norm();
            min_eig_rel = min_eig_rel.min(m.min_eigenvalue() / scale);
        }
    }
    report.push(
        Check::new("random_sweep_semipositive", min_eig_rel >= -tol::DOMINATION_REL)
            .with("checked", count as u64)
            .with("gamma_offsets", json!([0.0, 0.5, 1.0]))
            .with("min_eigenvalue_rel", min_eig_rel),
    );

    // g = (z, 1): the twist at γ = q cancels the curvature exactly.
    let hand = GeneratorSystem::new(vec![
        MultiPoly::monomial(1, &[1], skodiv::Complex64::new(1.0, 0.0))?,
        MultiPoly::one(1),
    ])?;
    let mut worst = 0.0f64;
    for z in [[0.0, 0.0], [0.5, 0.0], [0.3, -0.4]] {
        let m = twisted_domination(&hand, &[skodiv::Complex64::new(z[0], z[1])], 1.0)?;
        worst = worst.max(m.min_eigenvalue().abs()).max(m.max_eigenvalue().abs());
    }
    report.push(
        Check::new("hand_case_vanishes", worst <= HAND_CASE_ABS).with("max_abs_eigenvalue", worst),
    );
    Ok(report)
}

/// Random check of the exact fiber-trace factorization of the ∂̄-datum
/// against the twisted curvature scalar.
pub fn run_identity_check(cfg: &RunConfig, seed: u64) -> anyhow::Result<Report> {
    let count = sweep_count(cfg, 1_000);
    let max_base = sweep_bound(cfg.sweep.and_then(|s| s.max_base), 3);
    let max_gens = sweep_bound(cfg.sweep.and_then(|s| s.max_rank), 3);
    let max_degree = sweep_bound(cfg.sweep.and_then(|s| s.max_degree), 3);
    let mut report = Report::new("identity-54", seed);
    report.parameter("count", count as u64);
    report.tolerance("trace_identity_abs", tol::TRACE_IDENTITY_ABS);

    let mut rng = rng_from_seed(seed);
    let mut max_residual = 0.0f64;
    for _ in 0..count {
        let (sys, z) = random_geometry(&mut rng, max_base, max_gens, max_degree);
        let f = rand_poly(sys.nvars(), max_degree.min(3), &mut rng);
        let psi_at_z: f64 = rng.gen_range(-1.0..1.0);
        let gamma: f64 = rng.gen_range(0.25..2.25);
        let residual = fiber_trace_identity_residual(&sys, &f, psi_at_z, gamma, &z)?;
        max_residual = max_residual.max(residual);
    }
    report.push(
        Check::new("factorization_residual", max_residual <= tol::TRACE_IDENTITY_ABS)
            .with("checked", count as u64)
            .with("max_residual", max_residual),
    );
    Ok(report)
}

/// Pointwise matrix inequalities behind the alternative division weights:
/// the difference forms must be positive semidefinite.
pub fn run_variants_check(cfg: &RunConfig, seed: u64) -> anyhow::Result<Report> {
    let count = sweep_count(cfg, 200);
    let max_base = sweep_bound(cfg.sweep.and_then(|s| s.max_base), 3);
    let max_gens = sweep_bound(cfg.sweep.and_then(|s| s.max_rank), 3);
    let max_degree = sweep_bound(cfg.sweep.and_then(|s| s.max_degree), 3);
    let mut report = Report::new("variants-check", seed);
    report.parameter("count", count as u64);
    report.tolerance("psd_form_rel", tol::PSD_FORM_REL);

    let mut rng = rng_from_seed(seed);
    let mut min_a = f64::INFINITY;
    let mut min_c = f64::INFINITY;
    for _ in 0..count {
        let (sys, z) = random_geometry(&mut rng, max_base, max_gens, max_degree);
        let diff_a = variant_inequality_check(&sys, &z, Variant::A)?;
        min_a = min_a.min(diff_a.min_eigenvalue() / (1.0 + diff_a.max_entry_norm()));

        // The logarithmic variant needs |g|² < 1 at the sample: rescale.
        let gnorm2 = sys.gnorm2(&z);
        let rho = (0.5 / gnorm2).sqrt();
        let shrunk = GeneratorSystem::new(
            sys.generators()
                .iter()
                .map(|g| g.scale(skodiv::Complex64::new(rho, 0.0)))
                .collect(),
        )?;
        let diff_c = variant_inequality_check(&shrunk, &z, Variant::C)?;
        min_c = min_c.min(diff_c.min_eigenvalue() / (1.0 + diff_c.max_entry_norm()));
    }
    report.push(
        Check::new("variant_a_difference_psd", min_a >= -tol::PSD_FORM_REL)
            .with("checked", count as u64)
            .with("min_eigenvalue_rel", min_a),
    );
    report.push(
        Check::new("variant_c_difference_psd", min_c >= -tol::PSD_FORM_REL)
            .with("checked", count as u64)
            .with("min_eigenvalue_rel", min_c),
    );
    Ok(report)
}

fn solution_details(check: Check, sol: &DivisionSolution) -> Check {
    let h_terms: Vec<Vec<skodiv::poly::PolyTerm>> =
        sol.h.iter().map(MultiPoly::to_terms).collect();
    check
        .with("h", serde_json::to_value(h_terms).expect("terms serialize"))
        .with("residual_max_coeff", sol.residual_max_coeff)
        .with("c_hat", sol.c_hat)
        .with("weighted_norm", sol.weighted_norm)
        .with("norm_diverged", sol.norm_diverged)
        .with("bound_theorem", sol.bound_theorem)
        .with("bound_constructive", sol.bound_constructive)
        .with("bound_ratio", sol.bound_ratio)
        .with("meets_theorem", sol.meets_theorem)
        .with("meets_constructive", sol.meets_constructive)
        .with("screened_directions", sol.screened_directions as u64)
        .with("optimality_residual", sol.optimality_residual)
}

/// Runs one division problem from the config and checks its bound.
pub fn run_divide(cfg: &RunConfig, seed: u64) -> anyhow::Result<Report> {
    let resolved = build_division(cfg)?;
    let mut report = Report::new("divide", seed);
    echo_division_parameters(&mut report, cfg, &resolved);
    report.tolerance("division_residual_rel", tol::DIVISION_RESIDUAL_REL);
    report.tolerance("gram_growth_pencil", tol::GRAM_GROWTH_PENCIL);
    report.tolerance("gram_diagonal_blowup", tol::GRAM_DIAGONAL_BLOWUP);
    report.tolerance("divergence_growth", tol::DIVERGENCE_GROWTH);
    report.tolerance("divergence_increment_ratio", tol::DIVERGENCE_INCREMENT_RATIO);
    report.tolerance("node_floor", tol::NODE_FLOOR);

    let outcome = match resolved.variant {
        DivisionVariant::Skoda => skoda_divide(&resolved.problem),
        _ => variant_divide(&resolved.problem),
    };
    match outcome {
        Ok(sol) => {
            report.push(
                solution_details(
                    Check::new("budget_integral_finite", true).with("value", sol.c_hat),
                    &sol,
                ),
            );
            report.push(Check::new(
                "exact_residual",
                sol.residual_max_coeff <= tol::DIVISION_RESIDUAL_REL * (1.0 + input_scale(cfg)?),
            ));
            report.push(Check::new("norm_finite", !sol.norm_diverged));
            report.push(Check::new(
                "norm_within_constructive_bound",
                sol.meets_constructive,
            ));
        }
        Err(Error::HypothesisFailed { name, value }) => {
            report.push(
                Check::new("budget_integral_finite", false)
                    .hypothesis_failed()
                    .with("constant", name)
                    .with("last_estimate", value),
            );
        }
        Err(e) => return Err(anyhow!(e)),
    }
    Ok(report)
}

fn input_scale(cfg: &RunConfig) -> anyhow::Result<f64> {
    let sys = build_system(cfg)?;
    let f = build_dividend(cfg, sys.nvars())?;
    Ok(sys
        .generators()
        .iter()
        .map(MultiPoly::max_coeff_norm)
        .fold(f.max_coeff_norm(), f64::max))
}

fn echo_division_parameters(
    report: &mut Report,
    cfg: &RunConfig,
    resolved: &crate::config::ResolvedDivision,
) {
    let gens: Vec<Vec<skodiv::poly::PolyTerm>> = resolved
        .problem
        .system()
        .generators()
        .iter()
        .map(MultiPoly::to_terms)
        .collect();
    report.parameter("generators", serde_json::to_value(gens).expect("serialize"));
    report.parameter(
        "f",
        serde_json::to_value(resolved.problem.dividend().to_terms()).expect("serialize"),
    );
    report.parameter("gamma", resolved.gamma);
    report.parameter(
        "psi",
        serde_json::to_value(cfg.psi.clone().unwrap_or_default()).expect("serialize"),
    );
    if let Some(phi) = &cfg.phi {
        report.parameter("phi", serde_json::to_value(phi.clone()).expect("serialize"));
    }
    report.parameter(
        "domain_radii",
        serde_json::to_value(resolved.problem.domain().radii()).expect("serialize"),
    );
    report.parameter("grid_radial", resolved.grid.radial as u64);
    report.parameter("grid_angular", resolved.grid.angular as u64);
    report.parameter("degree", resolved.degree as u64);
    report.parameter(
        "variant",
        serde_json::to_value(resolved.variant).expect("serialize"),
    );
}

/// Runs the iterated-division skeleton and verifies its re-expansion.
pub fn run_iterate(cfg: &RunConfig, seed: u64) -> anyhow::Result<Report> {
    let sys = build_system(cfg)?;
    let f = build_dividend(cfg, sys.nvars())?;
    let m0 = cfg.m0_budget.unwrap_or(1);
    let n0 = cfg.n0.unwrap_or(1);
    let mut report = Report::new("iterate", seed);
    report.parameter("m0_budget", m0 as u64);
    report.parameter("n0", n0 as u64);
    report.parameter(
        "f",
        serde_json::to_value(f.to_terms()).expect("serialize"),
    );
    report.tolerance("division_residual_rel", tol::DIVISION_RESIDUAL_REL);

    let run = iterated_division(&sys, &f, m0, n0)?;
    let back = run.tree.expand(&sys)?;
    let scale = 1.0 + f.max_coeff_norm();
    let residual = f.sub(&back)?.max_coeff_norm();
    report.push(
        Check::new(
            "reexpansion_exact",
            residual <= tol::DIVISION_RESIDUAL_REL * scale,
        )
        .with("residual_max_coeff", residual)
        .with("depth", run.depth as u64)
        .with("target_depth", run.target_depth as u64)
        .with("leaves", run.leaf_count() as u64),
    );
    report.push(
        Check::new("no_stalled_stages", run.stalls.is_empty())
            .with("stalls", serde_json::to_value(&run.stalls).expect("serialize")),
    );
    if run.stalls.is_empty() {
        report.push(
            Check::new("depth_matches_budget", run.depth == run.target_depth)
                .with("depth", run.depth as u64)
                .with("target_depth", run.target_depth as u64),
        );
    }
    Ok(report)
}

/// Runs every verification command; division and iteration are included
/// when the config supplies generators and a dividend.
pub fn run_all(cfg: &RunConfig, seed: u64) -> anyhow::Result<Report> {
    let mut report = Report::new("all", seed);
    report.absorb("cs-sweep", run_cs_sweep(cfg, seed)?);
    report.absorb("wedge-sweep", run_wedge_sweep(cfg, seed)?);
    report.absorb("curvature-verify", run_curvature_verify(cfg, seed)?);
    report.absorb("dominate", run_dominate(cfg, seed)?);
    report.absorb("identity-54", run_identity_check(cfg, seed)?);
    report.absorb("variants-check", run_variants_check(cfg, seed)?);
    if cfg.generators.is_some() && cfg.f.is_some() {
        report.absorb("divide", run_divide(cfg, seed)?);
        report.absorb("iterate", run_iterate(cfg, seed)?);
    }
    Ok(report)
}
