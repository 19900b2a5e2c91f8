//! `degenhyp`: batch front end driven by one JSON config per run.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod config;
pub mod run;

pub use config::{CommandKind, RunConfig};
pub use run::{run, Headline, RunReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) | Self::Io { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "degenhyp", version, about = "Loss of regularity for weakly hyperbolic Cauchy problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// delta(x) and the loss of a first-order system
    AnalyzeSystem(CommonArgs),
    /// Closed-form delta(x) of a scalar operator, cross-checked on its companion system
    AnalyzeOperator(CommonArgs),
    /// Spectral solve with energy diagnostics
    Solve(CommonArgs),
    /// Measure the loss of regularity from power-law data
    LossExperiment(CommonArgs),
    /// Numerical symbol-class membership check
    CheckSymbol(CommonArgs),
    /// Run one command over a list of parameter values
    Sweep(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (defaults to the number of cores)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides the config seed
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    fn split(&self) -> (CommandKind, &CommonArgs) {
        match self {
            Self::AnalyzeSystem(a) => (CommandKind::AnalyzeSystem, a),
            Self::AnalyzeOperator(a) => (CommandKind::AnalyzeOperator, a),
            Self::Solve(a) => (CommandKind::Solve, a),
            Self::LossExperiment(a) => (CommandKind::LossExperiment, a),
            Self::CheckSymbol(a) => (CommandKind::CheckSymbol, a),
            Self::Sweep(a) => (CommandKind::Sweep, a),
        }
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, args) = cli.command.split();
    let result = RunConfig::load(&args.config).and_then(|mut cfg| {
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        let workers = args.workers.unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Validation(format!("worker pool: {e}")))?;
        pool.install(|| run(kind, cfg, &args.out))
    });
    match result {
        Ok(report) => {
            eprintln!(
                "{} {} in {:.3} s; artifacts: {}",
                kind.as_str(),
                report.status,
                report.wall_time_s,
                report.artifacts.join(", ")
            );
            if report.status == "ok" {
                0
            } else {
                for f in &report.failures {
                    eprintln!("  {f}");
                }
                3
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
