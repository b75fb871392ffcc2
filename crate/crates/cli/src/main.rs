//! `densfts`: forecast and backtest panels of age-at-death densities.

mod commands;
mod config;
mod error;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Parser)]
#[command(name = "densfts", version, about = "Forecast density-valued functional panels")]
struct Cli {
    /// `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Input CSV (`state,gender,year,age,dx[,qx]`; an errors CSV for `report`).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Directory for output files, created if missing. Defaults to `.`.
    #[arg(long, global = true)]
    outdir: Option<PathBuf>,

    /// Worker threads. Defaults to the number of cores; results do not depend on it.
    #[arg(long, global = true)]
    parallel: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the input forms a rectangular panel and print its shape.
    Validate,
    /// Write the clr transform of every curve.
    Transform,
    /// Write the two-way functional ANOVA effects and residuals.
    Decompose,
    /// Write eigenvalues, retained order and eigenfunctions per state.
    Fpca,
    /// Forecast `horizon` years past the end of the input with each method.
    Forecast,
    /// Rolling-window evaluation: errors table, plot data and manifest.
    Backtest,
    /// Print an errors CSV as a horizon-by-method table.
    Report,
    /// Write a synthetic panel generated from the configured seed.
    Simulate {
        #[arg(long, default_value_t = 10)]
        states: usize,
        #[arg(long, default_value_t = 62)]
        years: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.parallel {
        if n == 0 {
            return Err(CliError::usage("--parallel", "--parallel needs at least one thread"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage("--parallel", e.to_string()))?;
    }
    let config = match &cli.config {
        Some(path) => RunConfig::parse(&fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)?,
        None => RunConfig::default(),
    };
    let ctx = Context {
        config,
        config_path: cli.config,
        input: cli.input,
        outdir: cli.outdir,
    };
    match cli.command {
        Command::Validate => commands::validate(&ctx),
        Command::Transform => commands::transform(&ctx),
        Command::Decompose => commands::decompose_cmd(&ctx),
        Command::Fpca => commands::fpca_cmd(&ctx),
        Command::Forecast => commands::forecast(&ctx),
        Command::Backtest => commands::backtest(&ctx),
        Command::Report => commands::report(&ctx),
        Command::Simulate { states, years } => commands::simulate(&ctx, states, years),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
