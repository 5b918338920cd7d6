//! Flag value types and JSON configuration files.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use vesseltopo::{CoherenceFn, PathStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    /// Paths on skeleton pixels with unit cost.
    Centerline,
    /// Paths on the whole foreground, cheapest along the centreline.
    Weighted,
}

impl StrategyName {
    pub fn with_exponent(self, exponent: f64) -> PathStrategy {
        match self {
            StrategyName::Centerline => PathStrategy::CenterlineGraph,
            StrategyName::Weighted => PathStrategy::WeightedFull { exponent },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoherenceName {
    Hamming,
    Feasible,
}

impl From<CoherenceName> for CoherenceFn {
    fn from(c: CoherenceName) -> Self {
        match c {
            CoherenceName::Hamming => CoherenceFn::Hamming,
            CoherenceName::Feasible => CoherenceFn::Feasible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Report columns, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
pub enum Metric {
    #[value(name = "auc")]
    #[serde(rename = "auc")]
    Auc,
    #[value(name = "acc")]
    #[serde(rename = "acc")]
    Acc,
    #[value(name = "sens")]
    #[serde(rename = "sens")]
    Sens,
    #[value(name = "spec")]
    #[serde(rename = "spec")]
    Spec,
    #[value(name = "cldice")]
    #[serde(rename = "cldice")]
    ClDice,
    /// Path index with the Hamming coherence.
    #[value(name = "mH")]
    #[serde(rename = "mH")]
    IndexHamming,
    /// Path index with the feasibility coherence.
    #[value(name = "mF")]
    #[serde(rename = "mF")]
    IndexFeasible,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Auc,
        Metric::Acc,
        Metric::Sens,
        Metric::Spec,
        Metric::ClDice,
        Metric::IndexHamming,
        Metric::IndexFeasible,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::Acc => "acc",
            Metric::Sens => "sens",
            Metric::Spec => "spec",
            Metric::ClDice => "cldice",
            Metric::IndexHamming => "mH",
            Metric::IndexFeasible => "mF",
        }
    }

    pub fn coherence(self) -> Option<CoherenceFn> {
        match self {
            Metric::IndexHamming => Some(CoherenceFn::Hamming),
            Metric::IndexFeasible => Some(CoherenceFn::Feasible),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Reads a JSON configuration file; unknown keys are rejected.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
