//! One loss value with its gradient and a finite-difference check.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use vesseltopo::io::{read_mask, read_probmap};
use vesseltopo::loss::ExclusionReason;
use vesseltopo::{gradient_check, loss, Grid, LossKind, LossParams};

use crate::config::read_json;
use crate::{ConfigError, Outcome};

#[derive(Args, Debug)]
pub struct LossCheckArgs {
    /// Soft prediction (value / 255).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth mask (foreground >= 128).
    #[arg(long)]
    gt: PathBuf,
    /// One of dice, bce, cldice, clbce, tsens, tprec, topo, propdice, propbce.
    #[arg(long = "loss")]
    loss_name: String,
    /// Foreground weight of bce [default: 0.5]
    #[arg(long)]
    alpha: Option<f64>,
    /// Skeleton weight of cldice, foreground weight of clbce [default: 0.7]
    #[arg(long)]
    alpha1: Option<f64>,
    /// Gap-versus-bridge balance of topo [default: 0.5]
    #[arg(long)]
    alpha2: Option<f64>,
    /// Centreline weight of clbce [default: 0.5]
    #[arg(long)]
    beta: Option<f64>,
    /// Weight of topo in propdice/propbce [default: 0.1]
    #[arg(long)]
    c: Option<f64>,
    /// Largest closing radius [default: 10]
    #[arg(long)]
    r_max: Option<usize>,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Report the value and gradient only.
    #[arg(long)]
    skip_fd: bool,
    /// JSON file with loss parameters; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct GradStats {
    min: f64,
    max: f64,
    mean: f64,
    l2_norm: f64,
}

#[derive(Serialize)]
struct Exclusions {
    outside_unit_interval: usize,
    near_tie: usize,
    routing_change: usize,
}

#[derive(Serialize)]
struct LossReport {
    loss: &'static str,
    params: LossParams,
    value: f64,
    degenerate: bool,
    grad_stats: GradStats,
    fd_max_rel_err: Option<f64>,
    fd_checked: Option<usize>,
    fd_excluded: Option<Exclusions>,
}

fn params(args: &LossCheckArgs) -> anyhow::Result<LossParams> {
    let mut p: LossParams = match &args.config {
        Some(path) => read_json(path)?,
        None => LossParams::default(),
    };
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut p.alpha, args.alpha);
    set(&mut p.alpha1, args.alpha1);
    set(&mut p.alpha2, args.alpha2);
    set(&mut p.beta, args.beta);
    set(&mut p.c, args.c);
    if let Some(r) = args.r_max {
        p.r_max = r;
    }
    p.validate()?;
    Ok(p)
}

pub fn run(args: LossCheckArgs) -> Result<Outcome, ConfigError> {
    let kind: LossKind = args.loss_name.parse()?;
    let params = params(&args)?;
    let pred = read_probmap(&args.pred).with_context(|| format!("prediction {}", args.pred.display()))?;
    let truth = read_mask(&args.gt).with_context(|| format!("ground truth {}", args.gt.display()))?;
    pred.ensure_same_dims(&truth)?;

    let v = loss(kind, &pred, &truth, &params, true)?;
    let g = v.gradient.as_ref().expect("gradient requested").values();
    let grad_stats = GradStats {
        min: g.iter().copied().fold(f64::INFINITY, f64::min),
        max: g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: g.iter().sum::<f64>() / g.len() as f64,
        l2_norm: g.iter().map(|x| x * x).sum::<f64>().sqrt(),
    };
    let check = if args.skip_fd {
        None
    } else {
        Some(gradient_check(kind, &pred, &truth, &params, args.step)?)
    };
    let count = |reason| {
        check
            .as_ref()
            .map_or(0, |c| c.excluded.iter().filter(|e| e.reason == reason).count())
    };
    let report = LossReport {
        loss: kind.name(),
        params,
        value: v.value,
        degenerate: v.degenerate,
        grad_stats,
        fd_max_rel_err: check.as_ref().map(|c| c.max_rel_error),
        fd_checked: check.as_ref().map(|c| c.checked),
        fd_excluded: check.as_ref().map(|_| Exclusions {
            outside_unit_interval: count(ExclusionReason::OutsideUnitInterval),
            near_tie: count(ExclusionReason::NearTie),
            routing_change: count(ExclusionReason::RoutingChange),
        }),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(Outcome::Success)
}
