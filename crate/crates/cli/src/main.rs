mod config;
mod evaluate;
mod freqmap;
mod loss_check;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Topology-aware evaluation of vessel segmentations.
#[derive(Parser)]
#[command(name = "vesseltopo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare a directory of predictions with same-stem ground truths.
    Evaluate(evaluate::EvaluateArgs),
    /// Render how often each pixel lies on a minimum-cost path.
    Freqmap(freqmap::FreqmapArgs),
    /// Evaluate one loss and check its gradient against finite differences.
    LossCheck(loss_check::LossCheckArgs),
}

/// How a command finished.
pub enum Outcome {
    Success,
    /// Some inputs were skipped or failed; the rest were processed.
    Partial,
}

/// Invalid flags, configuration or unusable inputs; nothing was produced.
#[derive(Debug)]
pub struct ConfigError(pub anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(args) => evaluate::run(args),
        Command::Freqmap(args) => freqmap::run(args),
        Command::LossCheck(args) => loss_check::run(args),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(1),
        Err(ConfigError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
