//! Minimum-cost paths on the 8-connected pixel graph.
//!
//! A [`CostField`] assigns every admissible pixel a finite node cost. Moving
//! between neighbors `u` and `v` costs `step * (cost(u) + cost(v)) / 2` with
//! `step` equal to 1 for cardinal and sqrt(2) for diagonal moves, so path
//! costs do not depend on the direction of travel. With uniform node costs
//! this is plain step length.
//!
//! Dijkstra settles nodes in order of (tentative cost, row, column), which
//! makes every tie deterministic. Paths between an unordered pair are always
//! extracted from the endpoint that comes first in raster order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::connected_components;
use crate::distance::distance_transform;
use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Grid, LabeledMask, Pixel, RealGrid, NEIGHBORS_8};
use crate::sampling::{sample_pair, PairSampler};
use crate::skeleton::skeletonize;

/// Largest admissible set accepted by exact (all-pairs) evaluation.
pub const EXACT_PIXEL_CAP: usize = 2000;

/// Default exponent of the distance weighting used by
/// [`PathStrategy::WeightedFull`].
pub const DEFAULT_EXPONENT: f64 = 2.0;

/// Where paths may run and what they pay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStrategy {
    /// Paths restricted to skeleton pixels, unit node cost.
    CenterlineGraph,
    /// Paths over the full foreground with node cost `1 / (1 + d)^exponent`,
    /// `d` being the distance to the nearest background pixel.
    WeightedFull { exponent: f64 },
}

impl PathStrategy {
    pub fn weighted() -> Self {
        PathStrategy::WeightedFull {
            exponent: DEFAULT_EXPONENT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PathStrategy::WeightedFull { exponent } if !(exponent > 0.0 && exponent.is_finite()) => {
                Err(Error::InvalidParameter {
                    name: "exponent",
                    reason: format!("must be positive and finite, got {exponent}"),
                })
            }
            _ => Ok(()),
        }
    }
}

impl Default for PathStrategy {
    fn default() -> Self {
        PathStrategy::CenterlineGraph
    }
}

/// Node cost of the weighted strategy at distance `d` from the background.
pub fn weighted_node_cost(distance: f64, exponent: f64) -> f64 {
    (1.0 + distance).powf(-exponent)
}

/// Per-pixel traversal cost; `None` marks impassable pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    width: usize,
    height: usize,
    cost: Vec<Option<f64>>,
}

impl Grid for CostField {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
}

impl CostField {
    pub fn new(width: usize, height: usize, cost: Vec<Option<f64>>) -> Result<Self> {
        BinaryMask::new(width, height, vec![false; cost.len()])?;
        if let Some((index, value)) = cost
            .iter()
            .enumerate()
            .find_map(|(i, c)| c.filter(|v| !(v.is_finite() && *v >= 0.0)).map(|v| (i, v)))
        {
            return Err(Error::InvalidParameter {
                name: "node_cost",
                reason: format!("cost {value} at index {index} is not finite and non-negative"),
            });
        }
        Ok(Self {
            width,
            height,
            cost,
        })
    }

    /// Unit cost on every foreground pixel of `mask`.
    pub fn uniform(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            cost: mask.data().iter().map(|&v| v.then_some(1.0)).collect(),
        }
    }

    pub fn cost(&self, p: Pixel) -> Option<f64> {
        self.cost[self.index_of(p)]
    }

    pub fn is_admissible(&self, p: Pixel) -> bool {
        self.contains(p) && self.cost(p).is_some()
    }

    pub fn admissible(&self) -> BinaryMask {
        BinaryMask::new(
            self.width,
            self.height,
            self.cost.iter().map(Option::is_some).collect(),
        )
        .expect("dims checked at construction")
    }

    pub fn admissible_count(&self) -> usize {
        self.cost.iter().filter(|c| c.is_some()).count()
    }
}

pub fn build_cost_field(mask: &BinaryMask, strategy: PathStrategy) -> CostField {
    match strategy {
        PathStrategy::CenterlineGraph => CostField::uniform(&skeletonize(mask)),
        PathStrategy::WeightedFull { exponent } => {
            let edt = distance_transform(mask);
            CostField {
                width: mask.width(),
                height: mask.height(),
                cost: mask
                    .data()
                    .iter()
                    .zip(edt.values())
                    .map(|(&fg, &d)| fg.then(|| weighted_node_cost(d, exponent)))
                    .collect(),
            }
        }
    }
}

/// Ordered pixel sequence between two endpoints, with its accumulated cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    pixels: Vec<Pixel>,
    total_cost: f64,
}

impl PathTrace {
    /// Validates that consecutive pixels are 8-neighbors, that no pixel
    /// repeats and that there are at least two pixels.
    pub fn new(pixels: Vec<Pixel>, total_cost: f64) -> Result<Self> {
        if pixels.len() < 2 {
            return Err(Error::InvalidPath("a path needs at least two pixels"));
        }
        if !pixels.windows(2).all(|w| w[0].is_neighbor(w[1])) {
            return Err(Error::InvalidPath("consecutive pixels must be 8-neighbors"));
        }
        let mut sorted = pixels.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPath("a pixel repeats"));
        }
        if !(total_cost.is_finite() && total_cost >= 0.0) {
            return Err(Error::InvalidPath("cost must be finite and non-negative"));
        }
        Ok(Self { pixels, total_cost })
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn start(&self) -> Pixel {
        self.pixels[0]
    }

    pub fn end(&self) -> Pixel {
        self.pixels[self.pixels.len() - 1]
    }
}

const NO_NODE: u32 = u32::MAX;

/// Admissible pixels compiled into a compact adjacency structure. Node ids
/// follow raster order, so comparing ids is comparing (row, column).
#[derive(Debug, Clone)]
pub struct PathGraph {
    width: usize,
    height: usize,
    pixels: Vec<Pixel>,
    node_of: Vec<u32>,
    offsets: Vec<u32>,
    edges: Vec<(u32, f64)>,
    component: Vec<u32>,
    component_count: u32,
}

impl PathGraph {
    pub fn new(field: &CostField) -> Self {
        let (w, h) = field.dims();
        let mut node_of = vec![NO_NODE; w * h];
        let mut pixels = Vec::new();
        for (i, c) in field.cost.iter().enumerate() {
            if c.is_some() {
                node_of[i] = pixels.len() as u32;
                pixels.push(field.pixel_at(i));
            }
        }
        let mut offsets = Vec::with_capacity(pixels.len() + 1);
        let mut edges = Vec::with_capacity(pixels.len() * 8);
        offsets.push(0);
        for &p in &pixels {
            let cu = field.cost(p).expect("admissible");
            for (dr, dc) in NEIGHBORS_8 {
                let Some(q) = field.offset(p, dr, dc) else { continue };
                let Some(cv) = field.cost(q) else { continue };
                let step = if dr != 0 && dc != 0 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                edges.push((node_of[field.index_of(q)], step * (cu + cv) * 0.5));
            }
            offsets.push(edges.len() as u32);
        }
        let labels = connected_components(&field.admissible());
        let component = pixels.iter().map(|&p| labels.label(p)).collect();
        Self {
            width: w,
            height: h,
            pixels,
            node_of,
            offsets,
            edges,
            component,
            component_count: labels.component_count(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixel(&self, node: u32) -> Pixel {
        self.pixels[node as usize]
    }

    pub fn node(&self, p: Pixel) -> Option<u32> {
        if p.row >= self.height || p.col >= self.width {
            return None;
        }
        let n = self.node_of[p.row * self.width + p.col];
        (n != NO_NODE).then_some(n)
    }

    /// Component label (1-based) of a node.
    pub fn component(&self, node: u32) -> u32 {
        self.component[node as usize]
    }

    pub fn component_count(&self) -> u32 {
        self.component_count
    }

    /// Component labels over the full grid.
    pub fn labels(&self) -> LabeledMask {
        let mut labels = vec![0; self.width * self.height];
        for (n, p) in self.pixels.iter().enumerate() {
            labels[p.row * self.width + p.col] = self.component[n];
        }
        LabeledMask::from_parts(self.width, self.height, labels, self.component_count)
    }

    fn neighbors(&self, node: u32) -> &[(u32, f64)] {
        let (a, b) = (
            self.offsets[node as usize] as usize,
            self.offsets[node as usize + 1] as usize,
        );
        &self.edges[a..b]
    }

    /// Number of unordered same-component node pairs.
    pub fn pair_count(&self) -> u64 {
        let mut sizes = vec![0u64; self.component_count as usize + 1];
        for &c in &self.component {
            sizes[c as usize] += 1;
        }
        sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum()
    }
}

#[derive(Clone, Copy)]
struct QueueEntry {
    cost: f64,
    node: u32,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // Reversed: BinaryHeap is a max-heap and we want the smallest
    // (cost, node) on top.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Shortest-path tree grown from one source.
#[derive(Debug, Clone)]
pub struct PathTree {
    source: u32,
    dist: Vec<f64>,
    pred: Vec<u32>,
    /// Nodes in the order they were settled; the source comes first.
    order: Vec<u32>,
}

impl PathTree {
    /// Runs Dijkstra from `source`. When `stop_after` is given, the search
    /// ends as soon as that many of the flagged nodes have been settled.
    pub fn grow(graph: &PathGraph, source: u32, targets: Option<(&[bool], usize)>) -> Self {
        let n = graph.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![NO_NODE; n];
        let mut settled = vec![false; n];
        let mut order = Vec::new();
        let mut heap = BinaryHeap::new();
        let mut remaining = targets.map(|(_, k)| k);
        dist[source as usize] = 0.0;
        heap.push(QueueEntry {
            cost: 0.0,
            node: source,
        });
        while let Some(QueueEntry { cost, node }) = heap.pop() {
            if settled[node as usize] {
                continue;
            }
            settled[node as usize] = true;
            order.push(node);
            if let (Some((flags, _)), Some(k)) = (targets, remaining.as_mut()) {
                if flags[node as usize] {
                    *k -= 1;
                    if *k == 0 {
                        break;
                    }
                }
            }
            for &(next, weight) in graph.neighbors(node) {
                if settled[next as usize] {
                    continue;
                }
                let candidate = cost + weight;
                let current = dist[next as usize];
                // Equal cost: keep the predecessor settled first.
                if candidate < current {
                    dist[next as usize] = candidate;
                    pred[next as usize] = node;
                    heap.push(QueueEntry {
                        cost: candidate,
                        node: next,
                    });
                }
            }
        }
        Self {
            source,
            dist,
            pred,
            order,
        }
    }

    pub fn source(&self) -> u32 {
        self.source
    }

    pub fn settle_order(&self) -> &[u32] {
        &self.order
    }

    pub fn predecessor(&self, node: u32) -> Option<u32> {
        let p = self.pred[node as usize];
        (p != NO_NODE).then_some(p)
    }

    pub fn cost_to(&self, node: u32) -> Option<f64> {
        let d = self.dist[node as usize];
        d.is_finite().then_some(d)
    }

    /// Node sequence from the source to `node`, if reached.
    pub fn nodes_to(&self, node: u32) -> Option<Vec<u32>> {
        if node != self.source && self.pred[node as usize] == NO_NODE {
            return None;
        }
        let mut nodes = vec![node];
        let mut cur = node;
        while cur != self.source {
            cur = self.pred[cur as usize];
            nodes.push(cur);
        }
        nodes.reverse();
        Some(nodes)
    }

    pub fn trace_to(&self, graph: &PathGraph, node: u32) -> Option<PathTrace> {
        let nodes = self.nodes_to(node)?;
        if nodes.len() < 2 {
            return None;
        }
        Some(PathTrace {
            pixels: nodes.iter().map(|&n| graph.pixel(n)).collect(),
            total_cost: self.dist[node as usize],
        })
    }
}

/// Minimum-cost path from `from` to `to`.
pub fn min_cost_path(field: &CostField, from: Pixel, to: Pixel) -> Result<PathTrace> {
    let graph = PathGraph::new(field);
    min_cost_path_in(&graph, from, to)
}

pub fn min_cost_path_in(graph: &PathGraph, from: Pixel, to: Pixel) -> Result<PathTrace> {
    if from == to {
        return Err(Error::InvalidPath("endpoints must differ"));
    }
    let lookup = |p: Pixel| {
        graph.node(p).ok_or(Error::NotAdmissible {
            row: p.row,
            col: p.col,
        })
    };
    let (a, b) = (lookup(from)?, lookup(to)?);
    let unreachable = Error::Unreachable {
        from: (from.row, from.col),
        to: (to.row, to.col),
    };
    if graph.component(a) != graph.component(b) {
        return Err(unreachable);
    }
    let mut flags = vec![false; graph.node_count()];
    flags[b as usize] = true;
    let tree = PathTree::grow(graph, a, Some((&flags, 1)));
    tree.trace_to(graph, b).ok_or(unreachable)
}

/// Unordered pair path: grown from the endpoint that is first in raster order.
pub(crate) fn canonical_pair(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// How a visit-frequency map enumerates pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyMode {
    /// Every unordered same-component pair of admissible pixels.
    Exact,
    /// `samples` pairs drawn by [`sample_pair`] from a seeded stream.
    Sampled { samples: usize, seed: u64 },
}

/// Rejects exact evaluation when the admissible set is larger than the cap.
pub fn check_exact_cap(graph: &PathGraph) -> Result<()> {
    if graph.node_count() > EXACT_PIXEL_CAP {
        return Err(Error::SizeCap {
            count: graph.node_count(),
            cap: EXACT_PIXEL_CAP,
        });
    }
    Ok(())
}

/// Runs one full Dijkstra per source node (in parallel) and hands each tree
/// to `score`; results come back in source order.
pub(crate) fn per_source<T: Send>(
    graph: &PathGraph,
    score: impl Fn(&PathTree) -> T + Sync,
) -> Vec<T> {
    (0..graph.node_count() as u32)
        .into_par_iter()
        .map(|s| score(&PathTree::grow(graph, s, None)))
        .collect()
}

/// Counts how often each pixel lies on an extracted minimum-cost path.
pub fn visit_frequency_map(
    mask: &BinaryMask,
    strategy: PathStrategy,
    mode: FrequencyMode,
) -> Result<RealGrid> {
    strategy.validate()?;
    let field = build_cost_field(mask, strategy);
    let graph = PathGraph::new(&field);
    let (w, h) = mask.dims();
    let mut counts = vec![0.0; w * h];

    match mode {
        FrequencyMode::Exact => {
            check_exact_cap(&graph)?;
            let partials = per_source(&graph, |tree| {
                // Subtree sizes counted over targets that come after the
                // source in raster order, so each unordered pair is used once.
                let mut sub = vec![0u64; graph.node_count()];
                for &n in tree.settle_order() {
                    if n > tree.source() {
                        sub[n as usize] = 1;
                    }
                }
                for &n in tree.settle_order().iter().rev() {
                    if let Some(p) = tree.predecessor(n) {
                        sub[p as usize] += sub[n as usize];
                    }
                }
                tree.settle_order()
                    .iter()
                    .filter(|&&n| sub[n as usize] > 0)
                    .map(|&n| (n, sub[n as usize]))
                    .collect::<Vec<_>>()
            });
            for part in partials {
                for (n, c) in part {
                    let p = graph.pixel(n);
                    counts[p.row * w + p.col] += c as f64;
                }
            }
        }
        FrequencyMode::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidParameter {
                    name: "samples",
                    reason: "must be at least 1".into(),
                });
            }
            let sampler = PairSampler::new(&graph)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pairs = (0..samples)
                .map(|_| sample_pair(&sampler, &mut rng).map(|(a, b)| canonical_pair(a, b)))
                .collect::<Result<Vec<_>>>()?;
            for path in paths_for_pairs(&graph, &pairs) {
                for n in path {
                    let p = graph.pixel(n);
                    counts[p.row * w + p.col] += 1.0;
                }
            }
        }
    }
    RealGrid::new(w, h, counts)
}

/// Extracts the canonical path of every `(source, target)` pair, growing one
/// tree per distinct source. Output order matches `pairs`.
pub(crate) fn paths_for_pairs(graph: &PathGraph, pairs: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let mut by_source: Vec<(u32, Vec<usize>)> = Vec::new();
    {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by_key(|&k| pairs[k].0);
        for k in order {
            match by_source.last_mut() {
                Some((s, ks)) if *s == pairs[k].0 => ks.push(k),
                _ => by_source.push((pairs[k].0, vec![k])),
            }
        }
    }
    let solved: Vec<Vec<(usize, Vec<u32>)>> = by_source
        .par_iter()
        .map(|(source, ks)| {
            let mut flags = vec![false; graph.node_count()];
            let mut distinct = 0;
            for &k in ks {
                let t = pairs[k].1 as usize;
                if !flags[t] {
                    flags[t] = true;
                    distinct += 1;
                }
            }
            let tree = PathTree::grow(graph, *source, Some((&flags, distinct)));
            ks.iter()
                .map(|&k| {
                    let nodes = tree
                        .nodes_to(pairs[k].1)
                        .expect("sampled pairs share a component");
                    (k, nodes)
                })
                .collect()
        })
        .collect();
    let mut out = vec![Vec::new(); pairs.len()];
    for group in solved {
        for (k, nodes) in group {
            out[k] = nodes;
        }
    }
    out
}
