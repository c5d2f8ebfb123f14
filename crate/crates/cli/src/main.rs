use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Momentum-based balance control toolkit.
#[derive(Debug, Parser)]
#[command(name = "balance", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its trajectory log as CSV.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Linearize a one-foot scenario about its posture and write the report as JSON.
    Linearize {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run two scenarios side by side and write their joint errors as CSV.
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed of both scenarios.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a summary of a model file.
    ModelInfo {
        model: PathBuf,
        /// Seed of the random configuration used for the block residual.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BALANCE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out, seed } => commands::simulate(&config, out.as_deref(), seed),
        Command::Linearize { config, out } => commands::linearize(&config, out.as_deref()),
        Command::Compare { first, second, out, seed } => commands::compare(&first, &second, out.as_deref(), seed),
        Command::ModelInfo { model, seed } => commands::model_info(&model, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
