//! `morawetz-lab` command-line front end.
//!
//! ```text
//! morawetz-lab simulate --config run.ini --out out/run1 --seed 7
//! ```
//!
//! Exit codes: 0 ok, 1 usage/config error, 2 an invariant check failed,
//! 3 numerical abort (NaN or mass reaching the box edge). The manifest is
//! written in every case except 1.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use morawetz_lab::io::{run_command, Command, ExperimentConfig, RunOptions};

/// Env var capping the number of worker threads.
const THREADS_ENV: &str = "MORAWETZ_LAB_THREADS";

#[derive(Parser)]
#[command(name = "morawetz-lab", version, about = "NLS two-center Morawetz diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// INI config file; defaults are used for anything not set
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the initial-data noise (overrides [output] seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only print errors
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Evolve the initial data and record the virial time series
    Simulate,
    /// Check the z' and z'' identities along a dt-halving ladder
    VerifyVirial,
    /// Compare analytic and spectral derivatives of the weight
    WeightCheck,
    /// Repulsivity, level-surface convexity and the trapped ray
    CheckHypotheses,
    /// Convexity margin of the weight gradient across the c ladder
    LemmaMargin,
    /// Locate the trapped ray between two bumps and test its instability
    TrappedRay,
    /// Pull-back Cauchy increments and dispersive decay
    ScatteringReport,
    /// Perturbed vs unperturbed flow for translated data
    FlowCompare,
    /// Print the exponent set for (dim, alpha)
    Exponents,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::VerifyVirial => Command::VerifyVirial,
            Cmd::WeightCheck => Command::WeightCheck,
            Cmd::CheckHypotheses => Command::CheckHypotheses,
            Cmd::LemmaMargin => Command::LemmaMargin,
            Cmd::TrappedRay => Command::TrappedRay,
            Cmd::ScatteringReport => Command::ScatteringReport,
            Cmd::FlowCompare => Command::FlowCompare,
            Cmd::Exponents => Command::Exponents,
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, String> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            ExperimentConfig::parse(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would collide with the
    // invariant-failure code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let cfg = match load_config(cli.config.as_ref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
    };
    match run_command(cli.command.into(), &cfg, &opts) {
        Ok(outcome) => {
            if !cli.quiet {
                for line in &outcome.lines {
                    println!("{line}");
                }
            } else {
                for f in &outcome.manifest.failures {
                    eprintln!("invariant failed: {f}");
                }
                if let Some(a) = &outcome.manifest.abort {
                    eprintln!("numerical abort: {a}");
                }
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
