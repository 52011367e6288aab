//! Command-line front end: dataset ingestion, configuration, subcommand
//! dispatch, and deterministic result serialization.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure. Errors are reported as machine-readable JSON on stdout.

mod commands;
mod config;
mod dataset;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CommandOutput;
use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};
use crate::output::{emit, error_document, render_json};

#[derive(Debug, Parser)]
#[command(
    name = "clborrow",
    version,
    about = "Composite-likelihood borrowing of reference-population information",
    long_about = "Borrows reference-population information into a target-population \
                  analysis through weighted (composite) likelihoods with bounded, \
                  similarity-driven weights. All commands are deterministic: identical \
                  inputs produce byte-identical outputs."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// Dataset CSV with header cohort,arm,y,<covariate...>
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run configuration JSON
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the result JSON here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the CSV table here (sweeps and tipping scans only)
    #[arg(long)]
    table: Option<PathBuf>,
    /// Confidence level override
    #[arg(long)]
    level: Option<f64>,
    /// Significance level override
    #[arg(long)]
    alpha: Option<f64>,
    /// Null value override
    #[arg(long)]
    p0: Option<f64>,
    /// Sweep grid resolution override
    #[arg(long)]
    points: Option<usize>,
    /// Not accepted: every command is deterministic by construction
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scalar composite fit of one arm with sandwich inference and tests
    Fit(CommonArgs),
    /// Weighted logistic regression with marginal response rates
    Glm(CommonArgs),
    /// Sweep the reference sample average at fixed reference size
    SweepMean(CommonArgs),
    /// Sweep the reference size at fixed reference sample average
    SweepSize(CommonArgs),
    /// Normalized power prior posterior for a binomial pair
    Npp(CommonArgs),
    /// Effective sample size of the borrowed information
    Ess(CommonArgs),
    /// Tipping-point scan over the borrowing weight
    Tipping(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Glm(_) => "glm",
            Command::SweepMean(_) => "sweep-mean",
            Command::SweepSize(_) => "sweep-size",
            Command::Npp(_) => "npp",
            Command::Ess(_) => "ess",
            Command::Tipping(_) => "tipping",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Fit(a)
            | Command::Glm(a)
            | Command::SweepMean(a)
            | Command::SweepSize(a)
            | Command::Npp(a)
            | Command::Ess(a)
            | Command::Tipping(a) => a,
        }
    }
}

fn resolve_config(args: &CommonArgs) -> CliResult<RunConfig> {
    if args.seed.is_some() {
        return Err(CliError::config(
            "--seed is not accepted: the tool is deterministic by construction and uses no randomness",
        ));
    }
    let mut config = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(level) = args.level {
        config.level = level;
    }
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    if let Some(p0) = args.p0 {
        config.p0 = Some(p0);
    }
    if let Some(points) = args.points {
        config.sweep.points = points;
    }
    config.validate()?;
    Ok(config)
}

fn run(command: &Command) -> CliResult<()> {
    let args = command.args();
    let config = resolve_config(args)?;
    let dataset = match &args.data {
        Some(path) => Some(Dataset::from_path(path)?),
        None => None,
    };

    let CommandOutput { json, table } = match command {
        Command::Fit(_) => commands::run_fit(&config, dataset.as_ref())?,
        Command::Glm(_) => commands::run_glm(&config, dataset.as_ref())?,
        Command::SweepMean(_) => commands::run_sweep_mean(&config, dataset.as_ref())?,
        Command::SweepSize(_) => commands::run_sweep_size(&config, dataset.as_ref())?,
        Command::Npp(_) => commands::run_npp(&config, dataset.as_ref())?,
        Command::Ess(_) => commands::run_ess(&config, dataset.as_ref())?,
        Command::Tipping(_) => commands::run_tipping(&config, dataset.as_ref())?,
    };

    match (&args.table, table) {
        (Some(path), Some(csv)) => {
            std::fs::write(path, csv).map_err(|e| {
                CliError::data(format!("cannot write '{}': {e}", path.display()))
            })?;
        }
        (Some(_), None) => {
            return Err(CliError::config(format!(
                "'{}' does not produce a CSV table",
                command.name()
            )));
        }
        (None, _) => {}
    }
    emit(&json, args.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            print!("{}", render_json(&error_document(&err)));
            ExitCode::from(err.exit_code())
        }
    }
}
