//! `bzm` — configured experiments over the spectral solver library.
//!
//! Usage: `bzm <command> --config <path> [--seed <u64>] [--out <dir>]`.
//!
//! Exit codes: 0 on success, 2 when a configured continuation threshold
//! stopped the run early, 1 on any hard error.  `BZM_THREADS` caps the
//! worker-thread count of parallel ensembles.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use bzm_cli::artifacts::{Artifacts, Manifest};
use bzm_cli::commands;
use bzm_cli::config::Config;
use bzm_cli::{Result, RunStatus};

#[derive(Parser)]
#[command(
    name = "bzm",
    version,
    about = "Dyadic analysis and zero-Mach solver experiments",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a configured field into dyadic blocks and report block norms.
    Decompose(RunArgs),
    /// Report Besov/Lebesgue norms of a configured field.
    Norm(RunArgs),
    /// Check the paraproduct + remainder product reconstruction on random pairs.
    BonyCheck(RunArgs),
    /// Measure harmonic-analysis inequality ratios over a random ensemble.
    InequalityProbe(RunArgs),
    /// Advance the coupled system and export its time series.
    Solve(RunArgs),
    /// Run the staged linearized iteration and export its contraction trail.
    Picard(RunArgs),
    /// Evaluate the lifespan lower-bound formula and its study windows.
    Lifespan(RunArgs),
    /// Re-evaluate the continuation quantities offline over a stored run.
    Continuation(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Random seed; overrides the config's `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `output.dir` key.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Decompose(_) => "decompose",
            Command::Norm(_) => "norm",
            Command::BonyCheck(_) => "bony-check",
            Command::InequalityProbe(_) => "inequality-probe",
            Command::Solve(_) => "solve",
            Command::Picard(_) => "picard",
            Command::Lifespan(_) => "lifespan",
            Command::Continuation(_) => "continuation",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Decompose(a)
            | Command::Norm(a)
            | Command::BonyCheck(a)
            | Command::InequalityProbe(a)
            | Command::Solve(a)
            | Command::Picard(a)
            | Command::Lifespan(a)
            | Command::Continuation(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; anything else is a
            // usage error.  Exit code 2 is reserved for monitor stops, so
            // usage errors map to 1.
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    init_thread_cap();
    match execute(&cli) {
        Ok(RunStatus::Clean) => ExitCode::SUCCESS,
        Ok(RunStatus::MonitorStopped) => ExitCode::from(2),
        Err(err) => {
            eprintln!("bzm: {err}");
            ExitCode::from(1)
        }
    }
}

/// Apply the `BZM_THREADS` cap before any parallel work spins up a pool.
fn init_thread_cap() {
    if let Ok(raw) = std::env::var("BZM_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("bzm: ignoring invalid BZM_THREADS value `{raw}`"),
        }
    }
}

fn execute(cli: &Cli) -> Result<RunStatus> {
    let started = Instant::now();
    let args = cli.command.args();
    let name = cli.command.name();

    let cfg = Config::load(&args.config)?;
    let config_seed: u64 = cfg.parse("seed", 0)?;
    let seed = args.seed.unwrap_or(config_seed);
    cfg.override_used("seed", seed.to_string());
    let config_dir = cfg.string("output.dir", "out");
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from(config_dir));
    cfg.override_used("output.dir", out_dir.display().to_string());
    let art = Artifacts::new(&out_dir)?;

    let (outcome, status) = commands::run(name, &cfg, &art, seed)?;

    let manifest = Manifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config_path: args.config.display().to_string(),
        settings: cfg.used(),
        ignored_keys: cfg.ignored(),
        outcome,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    art.manifest(&manifest)?;
    Ok(status)
}
