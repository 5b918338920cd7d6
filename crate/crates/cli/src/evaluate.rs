//! Batch comparison of prediction and ground-truth directories.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vesseltopo::io::{read_mask, read_probmap};
use vesseltopo::{
    cl_dice, exact_similarity, mc_similarity, pixel_metrics, BinaryMask, Grid, PathStrategy, ProbMap,
    SimilarityResult,
};

use crate::config::{read_json, CoherenceName, Format, Metric, StrategyName};
use crate::{ConfigError, Outcome};

const IMAGE_EXTENSIONS: [&str; 2] = ["png", "pgm"];

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Directory of prediction images (8-bit grayscale, value / 255).
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Directory of ground-truth masks (foreground >= 128).
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyName>,
    /// Exponent of the weighted strategy's distance cost.
    #[arg(long)]
    exponent: Option<f64>,
    /// Restrict the default metric set to one path index.
    #[arg(long, value_enum)]
    coherence: Option<CoherenceName>,
    /// Sampled pairs per term of the path index.
    #[arg(long)]
    samples: Option<usize>,
    /// Base seed; each image mixes in a hash of its name
    #[arg(long)]
    seed: Option<u64>,
    /// Binarization threshold for predictions (value >= threshold is vessel).
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated subset of auc,acc,sens,spec,cldice,mH,mF.
    #[arg(long, value_enum, value_delimiter = ',')]
    metrics: Option<Vec<Metric>>,
    /// Enumerate every pixel pair instead of sampling.
    #[arg(long)]
    exact: bool,
    /// Report destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// JSON file with any of the settings above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Settings accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    prediction_dir: Option<PathBuf>,
    groundtruth_dir: Option<PathBuf>,
    strategy: Option<StrategyName>,
    exponent: Option<f64>,
    coherence: Option<CoherenceName>,
    n_samples: Option<usize>,
    seed: Option<u64>,
    threshold: Option<f64>,
    metrics: Option<Vec<Metric>>,
    exact: Option<bool>,
    format: Option<Format>,
    out: Option<PathBuf>,
}

/// Effective settings of one run.
#[derive(Debug, Clone, Serialize)]
pub struct EvalConfig {
    pub prediction_dir: PathBuf,
    pub groundtruth_dir: PathBuf,
    pub strategy: StrategyName,
    pub exponent: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub threshold: f64,
    pub metrics: Vec<Metric>,
    pub exact: bool,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl EvalConfig {
    fn resolve(args: EvaluateArgs) -> anyhow::Result<Self> {
        let file: ConfigFile = match &args.config {
            Some(path) => read_json(path)?,
            None => ConfigFile::default(),
        };
        let prediction_dir = args
            .pred
            .or(file.prediction_dir)
            .context("no prediction directory (--pred)")?;
        let groundtruth_dir = args
            .gt
            .or(file.groundtruth_dir)
            .context("no ground-truth directory (--gt)")?;
        let coherence = args.coherence.or(file.coherence);
        let metrics = match args.metrics.or(file.metrics) {
            Some(list) => {
                ensure!(!list.is_empty(), "--metrics is empty");
                if let Some(c) = coherence {
                    let other = match c {
                        CoherenceName::Hamming => Metric::IndexFeasible,
                        CoherenceName::Feasible => Metric::IndexHamming,
                    };
                    ensure!(
                        !list.contains(&other),
                        "--metrics asks for {other} but --coherence is {c:?}"
                    );
                }
                list
            }
            None => Metric::ALL
                .into_iter()
                .filter(|m| match (m.coherence(), coherence) {
                    (Some(f), Some(c)) => f == c.into(),
                    _ => true,
                })
                .collect(),
        };
        let mut metrics = metrics;
        metrics.sort();
        metrics.dedup();

        let config = Self {
            prediction_dir,
            groundtruth_dir,
            strategy: args.strategy.or(file.strategy).unwrap_or(StrategyName::Centerline),
            exponent: args.exponent.or(file.exponent).unwrap_or(vesseltopo::pathfind::DEFAULT_EXPONENT),
            n_samples: args.samples.or(file.n_samples).unwrap_or(1000),
            seed: args.seed.or(file.seed).unwrap_or(0),
            threshold: args.threshold.or(file.threshold).unwrap_or(0.5),
            metrics,
            exact: args.exact || file.exact.unwrap_or(false),
            format: args.format.or(file.format).unwrap_or(Format::Csv),
            out: args.out.or(file.out),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> anyhow::Result<()> {
        ensure!(self.n_samples >= 1, "--samples must be at least 1");
        ensure!(
            (0.0..=1.0).contains(&self.threshold),
            "--threshold {} is outside [0, 1]",
            self.threshold
        );
        self.path_strategy().validate()?;
        for dir in [&self.prediction_dir, &self.groundtruth_dir] {
            ensure!(dir.is_dir(), "{} is not a directory", dir.display());
        }
        Ok(())
    }

    fn path_strategy(&self) -> PathStrategy {
        self.strategy.with_exponent(self.exponent)
    }
}

/// Per-image seed: the run seed XOR the first 8 bytes of SHA-256(stem), so
/// an image's samples do not depend on which other images are in the batch.
pub fn image_seed(seed: u64, stem: &str) -> u64 {
    let digest = Sha256::digest(stem.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(head)
}

/// Image files of `dir` keyed by file stem.
fn list_images(dir: &Path) -> anyhow::Result<BTreeMap<String, Vec<PathBuf>>> {
    let mut out: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let is_image = path.is_file()
            && path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)));
        if !is_image {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        out.entry(stem.to_owned()).or_default().push(path);
    }
    for files in out.values_mut() {
        files.sort();
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct Row {
    image_id: String,
    seed: u64,
    metrics: BTreeMap<Metric, Option<f64>>,
    /// Terms, sample counts and standard errors behind each path index.
    index: BTreeMap<Metric, SimilarityResult>,
    notes: Vec<String>,
    #[serde(skip)]
    failed: bool,
}

impl Row {
    fn new(image_id: &str, config: &EvalConfig) -> Self {
        Self {
            image_id: image_id.to_owned(),
            seed: image_seed(config.seed, image_id),
            metrics: config.metrics.iter().map(|&m| (m, None)).collect(),
            index: BTreeMap::new(),
            notes: Vec::new(),
            failed: false,
        }
    }

    fn fail(&mut self, what: impl std::fmt::Display) {
        self.notes.push(format!("error: {what}"));
        self.failed = true;
    }

    fn stderr(&self, m: Metric) -> Option<f64> {
        self.index.get(&m).and_then(|r| r.estimator_stderr)
    }
}

fn load_pair(pred: &Path, gt: &Path) -> anyhow::Result<(ProbMap, BinaryMask)> {
    let p = read_probmap(pred).with_context(|| format!("prediction {}", pred.display()))?;
    let y = read_mask(gt).with_context(|| format!("ground truth {}", gt.display()))?;
    p.ensure_same_dims(&y)?;
    Ok((p, y))
}

fn evaluate_image(stem: &str, pred: &Path, gt: &Path, config: &EvalConfig) -> Row {
    let mut row = Row::new(stem, config);
    let (p, y) = match load_pair(pred, gt) {
        Ok(pair) => pair,
        Err(e) => {
            row.fail(format!("{e:#}"));
            return row;
        }
    };
    let binary = p.threshold(config.threshold);
    let wants = |m| config.metrics.contains(&m);

    if [Metric::Auc, Metric::Acc, Metric::Sens, Metric::Spec].into_iter().any(wants) {
        match pixel_metrics(&p, &y, config.threshold) {
            Ok(r) => {
                let mut set = |m, v| {
                    if wants(m) {
                        row.metrics.insert(m, Some(v));
                    }
                };
                set(Metric::Acc, r.accuracy);
                set(Metric::Sens, r.sensitivity);
                set(Metric::Spec, r.specificity);
                if let Some(a) = r.auc {
                    set(Metric::Auc, a);
                } else if wants(Metric::Auc) {
                    row.notes.push("auc: ground truth has a single class".into());
                }
                if wants(Metric::Sens) && r.sensitivity_degenerate {
                    row.notes.push("sens: ground truth has no vessel pixel".into());
                }
                if wants(Metric::Spec) && r.specificity_degenerate {
                    row.notes.push("spec: ground truth has no background pixel".into());
                }
            }
            Err(e) => row.fail(e),
        }
    }
    if wants(Metric::ClDice) {
        match cl_dice(&binary, &y) {
            Ok(v) => {
                row.metrics.insert(Metric::ClDice, Some(v));
            }
            Err(e) => row.fail(e),
        }
    }
    for m in config.metrics.iter().copied() {
        let Some(f) = m.coherence() else { continue };
        let result = if config.exact {
            exact_similarity(&binary, &y, f, config.path_strategy())
        } else {
            mc_similarity(&binary, &y, f, config.path_strategy(), config.n_samples, row.seed)
        };
        match result {
            Ok(r) => {
                row.metrics.insert(m, Some(r.value));
                if r.recall_degenerate || r.precision_degenerate {
                    row.notes.push(format!("{m}: a mask has no pixel pair to connect"));
                }
                row.index.insert(m, r);
            }
            Err(e) => row.fail(format!("{m}: {e}")),
        }
    }
    row
}

#[derive(Debug, Serialize)]
struct MeanRow {
    metrics: BTreeMap<Metric, Option<f64>>,
    counts: BTreeMap<Metric, usize>,
}

fn mean_row(rows: &[Row], metrics: &[Metric]) -> MeanRow {
    let mut out = MeanRow {
        metrics: BTreeMap::new(),
        counts: BTreeMap::new(),
    };
    for &m in metrics {
        let values: Vec<f64> = rows.iter().filter_map(|r| r.metrics[&m]).collect();
        let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
        out.metrics.insert(m, mean);
        out.counts.insert(m, values.len());
    }
    out
}

#[derive(Debug, Serialize)]
struct Skipped {
    image_id: String,
    reason: String,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    config: &'a EvalConfig,
    rows: &'a [Row],
    mean: MeanRow,
    skipped: &'a [Skipped],
}

fn fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn write_csv(out: impl Write, report: &Report) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let metrics = &report.config.metrics;
    let mut header = vec!["image_id".to_owned()];
    for m in metrics {
        header.push(m.name().to_owned());
        if m.coherence().is_some() {
            header.push(format!("{m}_stderr"));
        }
    }
    header.push("note".into());
    w.write_record(&header)?;

    for row in report.rows {
        let mut record = vec![row.image_id.clone()];
        for &m in metrics {
            record.push(fixed(row.metrics[&m]));
            if m.coherence().is_some() {
                record.push(fixed(row.stderr(m)));
            }
        }
        record.push(row.notes.join("; "));
        w.write_record(&record)?;
    }

    let mut record = vec!["mean".to_owned()];
    let mut partial = Vec::new();
    for &m in metrics {
        record.push(fixed(report.mean.metrics[&m]));
        if m.coherence().is_some() {
            record.push(String::new());
        }
        let n = report.mean.counts[&m];
        if n < report.rows.len() {
            partial.push(format!("{m}: {n} of {} images", report.rows.len()));
        }
    }
    record.push(partial.join("; "));
    w.write_record(&record)?;
    w.flush()?;
    Ok(())
}

pub fn run(args: EvaluateArgs) -> Result<Outcome, ConfigError> {
    let config = EvalConfig::resolve(args)?;
    let preds = list_images(&config.prediction_dir)?;
    let truths = list_images(&config.groundtruth_dir)?;

    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for stem in preds.keys().chain(truths.keys().filter(|s| !preds.contains_key(*s))) {
        let reason = match (preds.get(stem), truths.get(stem)) {
            (Some(p), Some(t)) if p.len() == 1 && t.len() == 1 => {
                jobs.push((stem.clone(), p[0].clone(), t[0].clone()));
                continue;
            }
            (Some(_), None) => "no ground truth with this stem".to_owned(),
            (None, Some(_)) => "no prediction with this stem".to_owned(),
            _ => "several files share this stem".to_owned(),
        };
        skipped.push(Skipped {
            image_id: stem.clone(),
            reason,
        });
    }
    skipped.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    if jobs.is_empty() && skipped.is_empty() {
        return Err(anyhow::anyhow!(
            "no .png or .pgm images in {} or {}",
            config.prediction_dir.display(),
            config.groundtruth_dir.display()
        )
        .into());
    }
    for s in &skipped {
        eprintln!("skipped {}: {}", s.image_id, s.reason);
    }

    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|(stem, p, t)| evaluate_image(stem, p, t, &config))
        .collect();
    for row in rows.iter().filter(|r| r.failed) {
        eprintln!("{}: {}", row.image_id, row.notes.join("; "));
    }

    let report = Report {
        config: &config,
        rows: &rows,
        mean: mean_row(&rows, &config.metrics),
        skipped: &skipped,
    };
    let mut buffer = Vec::new();
    match config.format {
        Format::Csv => write_csv(&mut buffer, &report)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut buffer, &report)?;
            buffer.push(b'\n');
        }
    }
    match &config.out {
        Some(path) => fs::write(path, &buffer).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&buffer)?,
    }

    let partial = !skipped.is_empty() || rows.iter().any(|r| r.failed);
    Ok(if partial { Outcome::Partial } else { Outcome::Success })
}
