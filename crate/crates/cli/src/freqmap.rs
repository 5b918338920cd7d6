//! Visit-frequency heatmaps.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Serialize;
use vesseltopo::io::read_mask;
use vesseltopo::{save_heatmap, visit_frequency_map, FrequencyMode};

use crate::config::StrategyName;
use crate::{ConfigError, Outcome};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    /// Every same-component pixel pair.
    Exact,
    /// `--samples` pairs drawn from a seeded stream.
    Sampled,
}

#[derive(Args, Debug)]
pub struct FreqmapArgs {
    /// Vessel mask (foreground >= 128).
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, value_enum, default_value = "centerline")]
    strategy: StrategyName,
    #[arg(long, default_value_t = vesseltopo::pathfind::DEFAULT_EXPONENT)]
    exponent: f64,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Heatmap destination; PNG for a `.png` extension, binary PGM otherwise.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    max_count: f64,
    total_count: f64,
    visited_pixels: usize,
}

pub fn run(args: FreqmapArgs) -> Result<Outcome, ConfigError> {
    let mask = read_mask(&args.mask).with_context(|| format!("mask {}", args.mask.display()))?;
    let mode = match args.mode {
        Mode::Exact => FrequencyMode::Exact,
        Mode::Sampled => FrequencyMode::Sampled {
            samples: args.samples,
            seed: args.seed,
        },
    };
    let counts = visit_frequency_map(&mask, args.strategy.with_exponent(args.exponent), mode)?;
    save_heatmap(&counts, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let summary = Summary {
        max_count: counts.max(),
        total_count: counts.sum(),
        visited_pixels: counts.values().iter().filter(|&&c| c > 0.0).count(),
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(Outcome::Success)
}
