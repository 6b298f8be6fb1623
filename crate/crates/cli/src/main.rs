//! Batch command line for exposure-mixture shift analysis.
//!
//! Every subcommand reads one strict TOML config (see docs/run-config.md for
//! an annotated example) and writes its outputs into the configured output
//! directory. Exit codes: 0 success, 2 config error, 3 data validation
//! error, 4 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mixshift::error::Error;

use commands::Ctx;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "mixshift", version, about = "Shift-intervention analysis for exposure mixtures")]
struct Cli {
    /// Path to the run configuration (TOML).
    #[arg(long, global = true, default_value = "mixshift.toml")]
    config: PathBuf,
    /// Cap on parallel workers; overrides the config's `threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the dataset, printing a summary.
    IngestCheck,
    /// Spearman correlation matrices per timepoint.
    Correlate,
    /// Convex-hull extrapolation reports for each policy and timepoint.
    Diagnose,
    /// Pairwise kernel density surface with low-density flags.
    Density,
    /// Shift-policy estimates and contrasts with Wald inference.
    Estimate,
    /// Additive-scale interaction test from three policies.
    Interaction,
    /// Draw a dataset from a reference DGP and compute counterfactual truth.
    Simulate,
}

fn run(cli: Cli) -> mixshift::Result<()> {
    let config = RunConfig::load(&cli.config)?;
    let ctx = Ctx::new(config, cli.threads)?;
    match cli.command {
        Command::IngestCheck => commands::cmd_ingest_check(&ctx),
        Command::Correlate => commands::cmd_correlate(&ctx),
        Command::Diagnose => commands::cmd_diagnose(&ctx),
        Command::Density => commands::cmd_density(&ctx),
        Command::Estimate => commands::cmd_estimate(&ctx),
        Command::Interaction => commands::cmd_interaction(&ctx),
        Command::Simulate => commands::cmd_simulate(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::Io(_) | Error::Dimension(_) => 2,
                Error::Parse(_) | Error::Validation(_) => 3,
                Error::Numerical(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}
