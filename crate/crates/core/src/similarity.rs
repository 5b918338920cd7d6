//! Path-based topological similarity between two masks.
//!
//! Minimum-cost paths are extracted between same-component pixel pairs of
//! one mask and scored for coverage by the other. The recall term uses the
//! ground-truth paths scored against the prediction, the precision term the
//! reverse, and the index is their geometric mean.
//!
//! A mask with no same-component pair contributes a term of 1 when the other
//! mask has none either, and 0 otherwise. Exact and sampled evaluation apply
//! the same rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Grid};
use crate::pathfind::{
    build_cost_field, canonical_pair, check_exact_cap, paths_for_pairs, per_source, PathGraph,
    PathStrategy, PathTrace,
};
use crate::sampling::{sample_pair, PairSampler};

/// How a path is scored against a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceFn {
    /// Fraction of path pixels that are foreground in the mask.
    Hamming,
    /// 1 when every path pixel is foreground in the mask, else 0.
    Feasible,
}

impl CoherenceFn {
    /// Score of a path with `len` pixels of which `uncovered` are background.
    pub fn score(self, len: usize, uncovered: usize) -> f64 {
        match self {
            CoherenceFn::Hamming => (len - uncovered) as f64 / len as f64,
            CoherenceFn::Feasible => (uncovered == 0) as u8 as f64,
        }
    }

    /// Applies the function to an explicit path.
    pub fn eval(self, path: &PathTrace, mask: &BinaryMask) -> Result<f64> {
        Ok(self.score(path.len(), uncovered(path, mask)?))
    }
}

fn uncovered(path: &PathTrace, mask: &BinaryMask) -> Result<usize> {
    let mut count = 0;
    for &p in path.pixels() {
        if !mask.contains(p) {
            return Err(Error::OutOfBounds {
                row: p.row,
                col: p.col,
                width: mask.width(),
                height: mask.height(),
            });
        }
        count += !mask.get(p) as usize;
    }
    Ok(count)
}

/// `(n - H) / n` for a path of `n` pixels, `H` of them background in `mask`.
pub fn f_hamming(path: &PathTrace, mask: &BinaryMask) -> Result<f64> {
    CoherenceFn::Hamming.eval(path, mask)
}

/// 1 if every pixel of `path` is foreground in `mask`, else 0.
pub fn f_feasible(path: &PathTrace, mask: &BinaryMask) -> Result<f64> {
    CoherenceFn::Feasible.eval(path, mask)
}

/// Outcome of comparing two masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult {
    /// Geometric mean of the two terms.
    pub value: f64,
    /// Ground-truth paths scored against the prediction.
    pub recall_term: f64,
    /// Prediction paths scored against the ground truth.
    pub precision_term: f64,
    /// Paths behind (recall, precision): pair counts in exact mode, sample
    /// counts in sampled mode, 0 for a term fixed by the degenerate rule.
    pub n_paths_used: (u64, u64),
    /// Standard error of the sampled value; `None` in exact mode and when
    /// the delta method is undefined (a zero value with noisy terms).
    pub estimator_stderr: Option<f64>,
    pub recall_stderr: Option<f64>,
    pub precision_stderr: Option<f64>,
    /// Set when the recall term was fixed by the degenerate rule because the
    /// ground truth has no same-component pair.
    pub recall_degenerate: bool,
    /// Same for the precision term and the prediction.
    pub precision_degenerate: bool,
}

impl SimilarityResult {
    fn from_terms(recall: Term, precision: Term) -> Self {
        let value = (recall.mean * precision.mean).sqrt();
        let estimator_stderr = match (recall.stderr, precision.stderr) {
            (Some(sa), Some(sb)) => delta_method(recall.mean, precision.mean, sa, sb),
            _ => None,
        };
        Self {
            value,
            recall_term: recall.mean,
            precision_term: precision.mean,
            n_paths_used: (recall.paths, precision.paths),
            estimator_stderr,
            recall_stderr: recall.stderr,
            precision_stderr: precision.stderr,
            recall_degenerate: recall.degenerate,
            precision_degenerate: precision.degenerate,
        }
    }
}

/// Standard error of `sqrt(a b)` from those of `a` and `b`, treating the
/// two terms as independent.
fn delta_method(a: f64, b: f64, se_a: f64, se_b: f64) -> Option<f64> {
    let m = (a * b).sqrt();
    if m == 0.0 {
        return (se_a == 0.0 && se_b == 0.0).then_some(0.0);
    }
    let (da, db) = (b / (2.0 * m), a / (2.0 * m));
    Some((da * da * se_a * se_a + db * db * se_b * se_b).sqrt())
}

#[derive(Debug, Clone, Copy)]
struct Term {
    mean: f64,
    paths: u64,
    stderr: Option<f64>,
    degenerate: bool,
}

impl Term {
    fn degenerate(other_has_pairs: bool, sampled: bool) -> Self {
        Term {
            mean: if other_has_pairs { 0.0 } else { 1.0 },
            paths: 0,
            stderr: sampled.then_some(0.0),
            degenerate: true,
        }
    }
}

fn graph_for(mask: &BinaryMask, strategy: PathStrategy) -> PathGraph {
    PathGraph::new(&build_cost_field(mask, strategy))
}

fn prepare(
    pred: &BinaryMask,
    truth: &BinaryMask,
    strategy: PathStrategy,
) -> Result<(PathGraph, PathGraph)> {
    pred.ensure_same_dims(truth)?;
    strategy.validate()?;
    Ok((graph_for(truth, strategy), graph_for(pred, strategy)))
}

/// Mean coherence over every same-component pair of `graph`, scored
/// against `other`. One shortest-path tree per source pixel yields the
/// length and uncovered count of every path leaving it.
fn exact_term(graph: &PathGraph, other: &BinaryMask, f: CoherenceFn) -> (f64, u64) {
    let covered: Vec<bool> = (0..graph.node_count() as u32)
        .map(|n| other.get(graph.pixel(n)))
        .collect();
    let partials = per_source(graph, |tree| {
        let mut len = vec![0usize; graph.node_count()];
        let mut miss = vec![0usize; graph.node_count()];
        let mut sum = 0.0;
        let mut pairs = 0u64;
        for &n in tree.settle_order() {
            let (l, h) = match tree.predecessor(n) {
                Some(p) => (len[p as usize], miss[p as usize]),
                None => (0, 0),
            };
            len[n as usize] = l + 1;
            miss[n as usize] = h + !covered[n as usize] as usize;
            if n > tree.source() {
                sum += f.score(len[n as usize], miss[n as usize]);
                pairs += 1;
            }
        }
        (sum, pairs)
    });
    let (sum, pairs) = partials
        .into_iter()
        .fold((0.0, 0), |(s, k), (ds, dk)| (s + ds, k + dk));
    (sum / pairs as f64, pairs)
}

/// Index over all unordered same-component pairs of both masks.
///
/// `pred` and `truth` must share dimensions, and each admissible set must be
/// within [`crate::pathfind::EXACT_PIXEL_CAP`].
pub fn exact_similarity(
    pred: &BinaryMask,
    truth: &BinaryMask,
    f: CoherenceFn,
    strategy: PathStrategy,
) -> Result<SimilarityResult> {
    let (truth_graph, pred_graph) = prepare(pred, truth, strategy)?;
    check_exact_cap(&truth_graph)?;
    check_exact_cap(&pred_graph)?;
    let (truth_pairs, pred_pairs) = (truth_graph.pair_count(), pred_graph.pair_count());
    let term = |graph: &PathGraph, other: &BinaryMask, other_pairs: u64| {
        if graph.pair_count() == 0 {
            return Term::degenerate(other_pairs > 0, false);
        }
        let (mean, paths) = exact_term(graph, other, f);
        Term {
            mean,
            paths,
            stderr: None,
            degenerate: false,
        }
    };
    Ok(SimilarityResult::from_terms(
        term(&truth_graph, pred, pred_pairs),
        term(&pred_graph, truth, truth_pairs),
    ))
}

/// Pairs drawn per random stream.
pub const SAMPLE_BLOCK: usize = 256;

/// `n` pairs for one term. Block `b` of term `t` draws from the ChaCha
/// stream `(t << 32) | b` of the seed, so the sequence does not depend on
/// how the work is scheduled.
fn draw_pairs(sampler: &PairSampler, n: usize, seed: u64, term: u64) -> Result<Vec<(u32, u32)>> {
    let mut pairs = Vec::with_capacity(n);
    for block in 0..n.div_ceil(SAMPLE_BLOCK) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((term << 32) | block as u64);
        let count = SAMPLE_BLOCK.min(n - block * SAMPLE_BLOCK);
        for _ in 0..count {
            let (a, b) = sample_pair(sampler, &mut rng)?;
            pairs.push(canonical_pair(a, b));
        }
    }
    Ok(pairs)
}

fn sampled_term(
    graph: &PathGraph,
    other: &BinaryMask,
    f: CoherenceFn,
    n: usize,
    seed: u64,
    term: u64,
) -> Result<Term> {
    let sampler = PairSampler::new(graph)?;
    let pairs = draw_pairs(&sampler, n, seed, term)?;
    let scores: Vec<f64> = paths_for_pairs(graph, &pairs)
        .iter()
        .map(|nodes| {
            let miss = nodes
                .iter()
                .filter(|&&k| !other.get(graph.pixel(k)))
                .count();
            f.score(nodes.len(), miss)
        })
        .collect();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(Term {
        mean,
        paths: n as u64,
        stderr: Some(stderr),
        degenerate: false,
    })
}

/// Index estimated from `n` sampled pairs per term; deterministic in
/// `(pred, truth, f, strategy, n, seed)`.
pub fn mc_similarity(
    pred: &BinaryMask,
    truth: &BinaryMask,
    f: CoherenceFn,
    strategy: PathStrategy,
    n: usize,
    seed: u64,
) -> Result<SimilarityResult> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: "must be at least 1".into(),
        });
    }
    let (truth_graph, pred_graph) = prepare(pred, truth, strategy)?;
    let (truth_has, pred_has) = (truth_graph.pair_count() > 0, pred_graph.pair_count() > 0);
    let term = |graph: &PathGraph, other: &BinaryMask, other_has: bool, id: u64| {
        if graph.pair_count() == 0 {
            return Ok(Term::degenerate(other_has, true));
        }
        sampled_term(graph, other, f, n, seed, id)
    };
    Ok(SimilarityResult::from_terms(
        term(&truth_graph, pred, pred_has, 0)?,
        term(&pred_graph, truth, truth_has, 1)?,
    ))
}
