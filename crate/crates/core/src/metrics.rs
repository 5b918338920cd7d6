//! Pixel-level and skeleton-overlap comparison metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Grid, ProbMap};
use crate::skeleton::skeletonize;

/// Harmonic mean of skeleton precision `|skel(P) ∩ Y| / |skel(P)|` and
/// skeleton sensitivity `|skel(Y) ∩ P| / |skel(Y)|`. Two empty skeletons
/// give 1, exactly one empty skeleton gives 0.
pub fn cl_dice(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    pred.ensure_same_dims(truth)?;
    let (sp, st) = (skeletonize(pred), skeletonize(truth));
    let (np, nt) = (sp.count(), st.count());
    match (np, nt) {
        (0, 0) => return Ok(1.0),
        (0, _) | (_, 0) => return Ok(0.0),
        _ => {}
    }
    let tprec = sp.intersection_count(truth) as f64 / np as f64;
    let tsens = st.intersection_count(pred) as f64 / nt as f64;
    if tprec + tsens == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * tprec * tsens / (tprec + tsens))
}

/// Confusion counts and derived rates at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelMetricReport {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Absent when the ground truth has a single class.
    pub auc: Option<f64>,
    pub threshold: f64,
    pub true_positive: u64,
    pub true_negative: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    /// Ground truth has no positive pixel; sensitivity reported as 1.
    pub sensitivity_degenerate: bool,
    /// Ground truth has no negative pixel; specificity reported as 1.
    pub specificity_degenerate: bool,
}

/// Thresholds `pred` (value >= threshold is positive) and compares it with
/// `truth` pixel by pixel.
pub fn pixel_metrics(pred: &ProbMap, truth: &BinaryMask, threshold: f64) -> Result<PixelMetricReport> {
    pred.ensure_same_dims(truth)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: format!("{threshold} is outside [0, 1]"),
        });
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&v, &t) in pred.values().iter().zip(truth.data()) {
        match (v >= threshold, t) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(PixelMetricReport {
        accuracy: (tp + tn) as f64 / (tp + tn + fp + fn_) as f64,
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        auc: auc(pred, truth).ok(),
        threshold,
        true_positive: tp,
        true_negative: tn,
        false_positive: fp,
        false_negative: fn_,
        sensitivity_degenerate: tp + fn_ == 0,
        specificity_degenerate: tn + fp == 0,
    })
}

/// Area under the ROC curve from the Mann–Whitney statistic, with tied
/// scores sharing their mean rank.
pub fn auc(pred: &ProbMap, truth: &BinaryMask) -> Result<f64> {
    pred.ensure_same_dims(truth)?;
    let positives = truth.count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InvalidParameter {
            name: "ground_truth",
            reason: "AUC needs both positive and negative pixels".into(),
        });
    }
    let mut order: Vec<usize> = (0..pred.len()).collect();
    let values = pred.values();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    // Sum of (1-based) ranks of positives, with midranks across ties.
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let midrank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| truth.data()[i]).count();
        rank_sum += midrank * pos_in_group as f64;
        start = end;
    }
    let (np, nn) = (positives as f64, negatives as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}
