//! `matchwelfare`: reproducible welfare experiments on one-sided matching.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{BoundsArgs, EvalArgs, ExperimentConfig, GenerateArgs, N3Args};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "matchwelfare", version, about = "Welfare laboratory for one-sided matching mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated profile as JSON.
    Generate(GenerateArgs),
    /// Evaluate a mechanism on a profile file.
    Eval(EvalArgs),
    /// Run a bound-check suite and write one CSV row per check.
    Bounds(BoundsArgs),
    /// Minimise the welfare ratio over all three-agent instances.
    N3(N3Args),
    /// Re-run the configuration embedded in an earlier output file.
    Replay {
        file: PathBuf,
        /// Where to write the new output (a directory for `n3`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MATCHWELFARE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("MATCHWELFARE_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let config = match cli.command {
        Command::Generate(a) => ExperimentConfig::Generate(a),
        Command::Eval(a) => ExperimentConfig::Eval(a),
        Command::Bounds(a) => ExperimentConfig::Bounds(a),
        Command::N3(a) => ExperimentConfig::N3(a),
        Command::Replay { file, out } => {
            let text = std::fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
            let mut config = commands::embedded_config(&text)?;
            if let Some(out) = out {
                config.redirect(out);
            }
            config
        }
    };
    commands::run(&config)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
