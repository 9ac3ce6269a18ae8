//! `shuntlab`: batch analysis of a piezoelectric structure controlled by a
//! digital vibration absorber. Scenario configs in, CSV/JSON data out.

mod commands;
mod config;
mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Scenario;
use output::{ensure_dir, note};

#[derive(Debug)]
pub enum CliError {
    /// Bad scenario, unknown keys, unwritable output: exit code 2.
    Config(String),
    /// A solver or analysis failed: exit code 3.
    Numeric(String),
}

impl From<shuntlab_core::Error> for CliError {
    fn from(e: shuntlab_core::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "shuntlab",
    about = "Tuning, delay-stability analysis and sampled-data simulation of digitally emulated RL shunts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equal-peak series RL tuning for the configured plant.
    Tune(CommonArgs),
    /// Gain crossovers, phase margin and gain margin of the open loop.
    Margins(CommonArgs),
    /// Continuation of the closed-loop poles in the sampling period.
    Rootlocus(CommonArgs),
    /// Critical sampling periods (series, pure-delay and ZOH models).
    Critical(CommonArgs),
    /// Closed-loop frequency response under sampling delays.
    Frf(CommonArgs),
    /// Swept-sine simulation of the sampled loop.
    Simulate(CommonArgs),
    /// Delay-anticipating admittance modification and its verification.
    Stabilize(CommonArgs),
    /// Emit the data behind a numbered study figure.
    Reproduce(ReproduceArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario configuration (strict JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ReproduceArgs {
    /// Scenario configuration (strict JSON; may be minimal for reproduce).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Figure number: 3, 4, 5, 7, 8, 9, 11, 13 or 14.
    #[arg(long)]
    figure: u32,
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("SHUNTLAB_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("SHUNTLAB_THREADS must be an integer, got {raw:?}")))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("thread pool setup failed: {e}")))?;
        }
    }
    Ok(())
}

type Runner = Box<dyn FnOnce(&Scenario, &std::path::Path) -> Result<Vec<PathBuf>, CliError>>;

fn run() -> Result<(), CliError> {
    init_threads()?;
    let cli = Cli::parse();
    let (config, out, runner): (&PathBuf, &PathBuf, Runner) = match &cli.command {
        Command::Tune(a) => (&a.config, &a.out, Box::new(commands::run_tune)),
        Command::Margins(a) => (&a.config, &a.out, Box::new(commands::run_margins)),
        Command::Rootlocus(a) => (&a.config, &a.out, Box::new(commands::run_rootlocus)),
        Command::Critical(a) => (&a.config, &a.out, Box::new(commands::run_critical)),
        Command::Frf(a) => (&a.config, &a.out, Box::new(commands::run_frf)),
        Command::Simulate(a) => (&a.config, &a.out, Box::new(commands::run_simulate)),
        Command::Stabilize(a) => (&a.config, &a.out, Box::new(commands::run_stabilize)),
        Command::Reproduce(a) => {
            let figure = a.figure;
            (
                &a.config,
                &a.out,
                Box::new(move |_s: &Scenario, out: &std::path::Path| figures::run(figure, out)),
            )
        }
    };

    let scenario = Scenario::load(config)?;
    ensure_dir(out)?;
    let files = runner(&scenario, out)?;
    note(&format!("wrote {} file(s) to {}", files.len(), out.display()));
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shuntlab: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Numeric(_) => ExitCode::from(3),
            }
        }
    }
}
