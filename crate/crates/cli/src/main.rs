//! `rd-verify`: simulate reaction-diffusion systems, diagnose trajectories,
//! verify interpolation inequalities, and scan parameter grids.
//!
//! Exit codes: 0 success, 1 error, 2 blow-up, 3 inequality violation.

mod config;
mod diagnose;
mod run;
mod scan;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rd_core::solver::Termination;
use rd_core::systems::SystemConfig;

use config::{load, RunConfig, ScanConfig, VerifyConfig};

#[derive(Debug, Parser)]
#[command(name = "rd-verify", version, about)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; `diagnose` defaults to the trajectory directory.
    #[arg(long, global = true, env = "RD_VERIFY_OUT")]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Replaces the configured system (simulate) or preset list (scan).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Overrides the number of grid nodes.
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,
    /// Overrides the final time.
    #[arg(long = "T", global = true)]
    t_end: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a system and write snapshots plus a manifest.
    Simulate,
    /// Diagnose a stored trajectory.
    Diagnose {
        /// Directory written by `simulate`.
        dir: PathBuf,
    },
    /// Calibrate and validate inequality constants.
    Verify,
    /// Run a grid of simulations.
    Scan,
}

enum Outcome {
    Success,
    BlownUp,
    Violation,
}

impl Cli {
    fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new("rd-verify-out"))
    }
}

fn config_path(cli: &Cli) -> Result<&Path> {
    cli.config.as_deref().context("--config PATH is required")
}

fn simulate(cli: &Cli) -> Result<Outcome> {
    let (mut cfg, _) = load::<RunConfig>(config_path(cli)?)?;
    if let Some(name) = &cli.preset {
        cfg.system = SystemConfig::preset(name);
    }
    if let Some(n) = cli.grid_n {
        cfg.grid.n = n;
    }
    if let Some(t) = cli.t_end {
        cfg.solver.t_end = t;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let (manifest, _) = run::run_simulation(&cfg, cli.out_dir())?;
    match manifest.termination {
        Termination::Completed => {
            println!(
                "completed: {} snapshots in {}",
                manifest.snapshots.len(),
                cli.out_dir().display()
            );
            Ok(Outcome::Success)
        }
        Termination::BlownUp { t, species, norm } => {
            println!("blown_up: species {species} reached {norm:e} at t = {t}");
            Ok(Outcome::BlownUp)
        }
        Termination::StepFailure { t, reason } => {
            anyhow::bail!("step failure at t = {t}: {reason}")
        }
    }
}

fn diagnose(cli: &Cli, dir: &Path) -> Result<Outcome> {
    let out = cli.out.as_deref().unwrap_or(dir);
    let s = diagnose::run_diagnose(dir, out, cli.seed)?;
    println!(
        "gamma = {}{}, delta = {}, sup Morrey = {}, non-concentration ratio = {}",
        s.gamma,
        if s.holder.degenerate {
            " (degenerate)"
        } else {
            ""
        },
        s.delta,
        s.sup_morrey_z,
        s.nonconcentration_ratio
    );
    Ok(Outcome::Success)
}

fn verify(cli: &Cli) -> Result<Outcome> {
    let (mut cfg, _) = load::<VerifyConfig>(config_path(cli)?)?;
    if let Some(seed) = cli.seed {
        cfg.ensemble.seed = seed;
    }
    if let Some(n) = cli.grid_n {
        cfg.grid.n = n;
    }
    let report = verify::run_verify(&cfg, cli.out_dir())?;
    for r in &report.results {
        println!(
            "{} delta={:?}: calibrated C = {:e}, held-out max = {:e}, violations = {}",
            r.inequality, r.delta, r.calibrated_c, r.max_ratio, r.violations
        );
    }
    Ok(if report.total_violations == 0 {
        Outcome::Success
    } else {
        Outcome::Violation
    })
}

fn scan(cli: &Cli) -> Result<Outcome> {
    let (mut cfg, _) = load::<ScanConfig>(config_path(cli)?)?;
    if let Some(name) = &cli.preset {
        cfg.presets = vec![name.clone()];
    }
    if let Some(n) = cli.grid_n {
        cfg.grid.n = n;
    }
    if let Some(t) = cli.t_end {
        cfg.solver.t_end = t;
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    let rows = scan::run_scan(&cfg, cli.out_dir(), cli.jobs)?;
    for r in &rows {
        println!("row {}: {} {}", r.row, r.preset, r.status);
    }
    Ok(Outcome::Success)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignored if the global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let result = match &cli.command {
        Command::Simulate => simulate(&cli),
        Command::Diagnose { dir } => diagnose(&cli, dir),
        Command::Verify => verify(&cli),
        Command::Scan => scan(&cli),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::BlownUp) => ExitCode::from(2),
        Ok(Outcome::Violation) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
