use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use skodiv_cli::config::{GridSpec, RunConfig};
use skodiv_cli::report::Report;
use skodiv_cli::runners;

#[derive(Parser)]
#[command(
    name = "skodiv",
    version,
    about = "Verification and computation engine for ideal-membership division \
             with L² bounds: tensor inequalities, kernel-bundle curvature, \
             twisted domination, and effective division with certified constants."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; omitted fields fall back to built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the JSON report here as well as to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Quadrature grid as RADIALxANGULAR, e.g. 64x64; overrides the config.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<GridSpec>,

    /// Ansatz degree for division; overrides the config.
    #[arg(long, global = true)]
    degree: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Random sweep of the tensor Cauchy–Schwarz inequality and its tightness.
    CsSweep,
    /// Random sweep of the wedge-pairing inequality and its tensor reduction.
    WedgeSweep,
    /// Dual-route verification of kernel-subbundle curvature nonpositivity.
    CurvatureVerify,
    /// Semipositivity of the twist-dominated curvature form.
    Dominate,
    /// Exact factorization identity for the fiberwise ∂̄-datum trace.
    #[command(name = "identity-54")]
    Identity54,
    /// Positive semidefiniteness of the alternative-weight difference forms.
    VariantsCheck,
    /// One division run with certified L² bound.
    Divide,
    /// Iterated division skeleton with exact re-expansion.
    Iterate,
    /// Every verification pass in one report.
    All,
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let (r, a) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RADIALxANGULAR, got {s:?}"))?;
    let radial: usize = r.trim().parse().map_err(|e| format!("radial: {e}"))?;
    let angular: usize = a.trim().parse().map_err(|e| format!("angular: {e}"))?;
    if radial == 0 || angular == 0 {
        return Err("grid sides must be positive".into());
    }
    Ok(GridSpec { radial, angular })
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(grid) = cli.grid {
        cfg.grid = Some(grid);
    }
    if let Some(degree) = cli.degree {
        cfg.degree = Some(degree);
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);

    match cli.command {
        Command::CsSweep => runners::run_cs_sweep(&cfg, seed),
        Command::WedgeSweep => runners::run_wedge_sweep(&cfg, seed),
        Command::CurvatureVerify => runners::run_curvature_verify(&cfg, seed),
        Command::Dominate => runners::run_dominate(&cfg, seed),
        Command::Identity54 => runners::run_identity_check(&cfg, seed),
        Command::VariantsCheck => runners::run_variants_check(&cfg, seed),
        Command::Divide => runners::run_divide(&cfg, seed),
        Command::Iterate => runners::run_iterate(&cfg, seed),
        Command::All => runners::run_all(&cfg, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let rendered = report.render();
            print!("{rendered}");
            if let Some(path) = &cli.out {
                if let Err(e) = std::fs::write(path, &rendered) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            ExitCode::from(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
