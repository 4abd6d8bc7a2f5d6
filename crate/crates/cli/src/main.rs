//! `ckfdirac`: verification and experiment runs for Dirac operators with
//! magnetic fields parallel to conformal Killing fields.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{parse_point, CkfArg, GridArg, PotentialArg, RunConfig, TsRange, SCHEMA};

#[derive(Parser, Debug)]
#[command(name = "ckfdirac", version, about, after_help = SCHEMA)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Full RunConfig as JSON (a previous run's manifest works too)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// ud | ro | cr:<mu> | parameter JSON
    #[arg(long, global = true)]
    ckf: Option<String>,
    /// zero | axial-bump | hopf-base:<mu> | modulated-hopf:<mu> | losyau | potential JSON
    #[arg(long, global = true)]
    potential: Option<String>,
    /// Orbit starting point x,y,z (repeatable)
    #[arg(long = "seed-point", global = true, allow_hyphen_values = true)]
    seed_point: Vec<String>,
    /// Number of random sample points
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Pass tolerance of the checks
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Integration time limit for field lines
    #[arg(long, global = true)]
    t_max: Option<f64>,
    /// Runge–Kutta tolerance
    #[arg(long, global = true)]
    rk_tol: Option<f64>,
    /// Grid as n,L: n points per axis on [-L, L]^3
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Finite-difference order, 2 or 4
    #[arg(long, global = true)]
    stencil: Option<usize>,
    /// Potential scalings as a:b:step
    #[arg(long, global = true, allow_hyphen_values = true)]
    ts: Option<String>,
    /// Eigensolver tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Quadrature nodes per axis for the norm decomposition check
    #[arg(long, global = true)]
    quadrature: Option<usize>,
    /// Output directory [env: CKFDIRAC_OUT]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Canonical form of a simple-rotation field
    Classify,
    /// Pointwise identities at random points
    VerifyIdentities,
    /// Integral curves, written as JSON lines
    FieldLines,
    /// Period, ∮div X, ∮|Y| and ∮X·A on closed orbits
    LoopIntegrals,
    /// Commutator identities of the spin operators
    VerifyOperators,
    /// Admissible eigenvalues from transport around orbits
    Holonomy,
    /// Smallest singular value of the grid operator along t·A
    SpectrumSweep,
    /// Loss–Yau zero mode: continuum and grid residuals, σ_min
    ControlLosyau,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::VerifyIdentities => "verify-identities",
            Command::FieldLines => "field-lines",
            Command::LoopIntegrals => "loop-integrals",
            Command::VerifyOperators => "verify-operators",
            Command::Holonomy => "holonomy",
            Command::SpectrumSweep => "spectrum-sweep",
            Command::ControlLosyau => "control-losyau",
        }
    }
}

fn flags(cli: &Cli) -> Result<RunConfig> {
    Ok(RunConfig {
        subcommand: cli.command.map(|c| c.name().to_string()),
        ckf: cli.ckf.as_deref().map(CkfArg::parse).transpose()?,
        potential: cli.potential.as_deref().map(PotentialArg::parse).transpose()?,
        seed_points: if cli.seed_point.is_empty() {
            None
        } else {
            Some(cli.seed_point.iter().map(|s| parse_point(s)).collect::<Result<_>>()?)
        },
        points: cli.points,
        tolerance: cli.tolerance,
        t_max: cli.t_max,
        rk_tol: cli.rk_tol,
        grid: cli.grid.as_deref().map(GridArg::parse).transpose()?,
        stencil: cli.stencil,
        ts: cli.ts.as_deref().map(TsRange::parse).transpose()?,
        tol: cli.tol,
        quadrature: cli.quadrature,
        out: cli.out.clone(),
        seed: cli.seed,
        threads: cli.threads,
    })
}

fn configure(cli: &Cli) -> Result<config::Resolved> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let resolved = config::resolve(file.overridden_by(flags(cli)?))?;
    rayon::ThreadPoolBuilder::new().num_threads(resolved.threads).build_global().context("starting the thread pool")?;
    Ok(resolved)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}\n\n{SCHEMA}");
            return ExitCode::from(2);
        }
    };
    match commands::run(&cfg) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in &failures {
                eprintln!("FAIL {f}");
            }
            eprintln!("{} check(s) failed", failures.len());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
