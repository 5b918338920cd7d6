//! Closing-based topological losses, baseline segmentation losses and a
//! finite-difference gradient checker.
//!
//! `P` is a soft prediction, `Y` a binary ground truth. `Y_s` is the
//! Zhang–Suen skeleton of `Y`, `P_s` the soft skeleton of `P` with `r_max`
//! iterations. Gradients are with respect to `P`.
//!
//! The losses are piecewise smooth: max/min selections, relu activations
//! and log clamps split the input space into regions, and the analytic
//! gradient is exact inside each region.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Grid, Pixel, ProbMap, RealGrid};
use crate::morph::{closing_values, soft_skeleton_on, SoftMap};
use crate::skeleton::skeletonize;
use crate::tape::{Tape, Var};

/// Lower bound applied to log arguments in the cross-entropy losses.
pub const LOG_CLAMP: f64 = 1e-7;

/// Per-radius weights of the closing cascade.
///
/// A gap closed first at radius `r` spans `2r - 1` or `2r` pixels. Weights
/// satisfy `w[r] (2r - 1) = w[r + 1] (2r + 2)` with `w[r_max] = 1`, so a
/// shorter gap never carries less total error than a longer one. A pixel
/// first closed at radius `r` collects `eps[r] + ... + eps[r_max] = w[r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    r_max: usize,
    w: Vec<f64>,
    eps: Vec<f64>,
}

impl WeightSchedule {
    pub fn new(r_max: usize) -> Result<Self> {
        if r_max == 0 {
            return Err(Error::InvalidParameter {
                name: "r_max",
                reason: "must be at least 1".into(),
            });
        }
        let mut w = vec![0.0; r_max];
        w[r_max - 1] = 1.0;
        for r in (1..r_max).rev() {
            w[r - 1] = w[r] * (2 * (r + 1)) as f64 / (2 * r - 1) as f64;
        }
        let eps = (1..=r_max)
            .map(|r| if r == r_max { w[r - 1] } else { w[r - 1] - w[r] })
            .collect();
        Ok(Self { r_max, w, eps })
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }

    /// Weight of radius `r`, 1-based.
    pub fn w(&self, r: usize) -> f64 {
        self.w[r - 1]
    }

    /// Increment of radius `r`, 1-based.
    pub fn eps(&self, r: usize) -> f64 {
        self.eps[r - 1]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn increments(&self) -> &[f64] {
        &self.eps
    }
}

/// `sum_r eps[r] (closing(P, r) - P)^2 * skeleton`, pixel by pixel.
pub fn error_map(pred: &SoftMap, skeleton: &BinaryMask, schedule: &WeightSchedule) -> Result<RealGrid> {
    pred.ensure_same_dims(skeleton)?;
    let (w, h) = pred.dims();
    let mut out = vec![0.0; w * h];
    for r in 1..=schedule.r_max() {
        let c = closing_values(pred.values(), w, h, r);
        for (i, o) in out.iter_mut().enumerate() {
            if skeleton.data()[i] {
                let d = c[i] - pred.values()[i];
                *o += schedule.eps(r) * d * d;
            }
        }
    }
    RealGrid::new(w, h, out)
}

/// Hyper-parameters shared by the loss family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossParams {
    /// Foreground weight of `bce`.
    pub alpha: f64,
    /// Dice/skeleton weight of `cldice` and foreground weight of `clbce`,
    /// also used by the composite losses.
    pub alpha1: f64,
    /// Gap-versus-bridge balance of `topo`.
    pub alpha2: f64,
    /// Centreline weight of `clbce`.
    pub beta: f64,
    /// Weight of `topo` inside the composite losses.
    pub c: f64,
    /// Largest closing radius; also the soft-skeleton iteration count.
    pub r_max: usize,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            alpha1: 0.7,
            alpha2: 0.5,
            beta: 0.5,
            c: 0.1,
            r_max: 10,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta", self.beta),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} is outside [0, 1]"),
                });
            }
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: format!("{} must be finite and non-negative", self.c),
            });
        }
        if self.r_max == 0 {
            return Err(Error::InvalidParameter {
                name: "r_max",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// The loss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `1 - 2 sum(PY) / sum(P^2 + Y^2)`.
    Dice,
    /// Class-weighted binary cross-entropy.
    Bce,
    /// `alpha1 dice + (1 - alpha1)(1 - soft clDice)`.
    ClDice,
    /// Cross-entropy with extra weight on true and predicted centrelines.
    ClBce,
    /// Gaps in `P` along the skeleton of `Y`.
    Tsens,
    /// Bridges in `Y`'s closings along the soft skeleton of `P`.
    Tprec,
    /// `alpha2 tsens + (1 - alpha2) tprec`.
    Topo,
    /// `cldice + c topo`.
    PropDice,
    /// `clbce + c topo`.
    PropBce,
}

impl LossKind {
    pub const ALL: [LossKind; 9] = [
        LossKind::Dice,
        LossKind::Bce,
        LossKind::ClDice,
        LossKind::ClBce,
        LossKind::Tsens,
        LossKind::Tprec,
        LossKind::Topo,
        LossKind::PropDice,
        LossKind::PropBce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Dice => "dice",
            LossKind::Bce => "bce",
            LossKind::ClDice => "cldice",
            LossKind::ClBce => "clbce",
            LossKind::Tsens => "tsens",
            LossKind::Tprec => "tprec",
            LossKind::Topo => "topo",
            LossKind::PropDice => "propdice",
            LossKind::PropBce => "propbce",
        }
    }

    /// Whether the loss passes through max/min selections of `P`.
    pub fn uses_morphology(self) -> bool {
        !matches!(self, LossKind::Dice | LossKind::Bce)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_prefix("loss_").unwrap_or(&key);
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidParameter {
                name: "loss",
                reason: format!(
                    "unknown loss {s:?}; expected one of {}",
                    LossKind::ALL.map(LossKind::name).join(", ")
                ),
            })
    }
}

/// A loss value and, when requested, its gradient with respect to `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Option<RealGrid>,
    /// A normalizer was zero (empty skeleton) and a term was set to 0.
    pub degenerate: bool,
}

/// Normalizers treated as constants by the gradient. Finite differences
/// must hold them fixed to match the analytic gradient.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Frozen {
    soft_skeleton_mass: Option<f64>,
}

struct Evaluation {
    value: f64,
    gradient: Option<Vec<f64>>,
    degenerate: bool,
    frozen: Frozen,
    signature: Vec<u32>,
}

/// Accumulates the value and the gradient seeds of a weighted sum of terms.
struct Builder<'a> {
    w: usize,
    h: usize,
    tape: Tape,
    p: Var,
    y: &'a [f64],
    y_skel: Vec<f64>,
    params: LossParams,
    p_skel: Option<Var>,
    frozen_in: Frozen,
    frozen_out: Frozen,
    seeds: Vec<(Var, Vec<f64>)>,
    direct: Vec<f64>,
    clamp_flags: Vec<u32>,
    degenerate: bool,
}

fn log_clamped(x: f64) -> f64 {
    x.max(LOG_CLAMP).ln()
}

/// Derivative of `log_clamped` (zero inside the clamp).
fn dlog_clamped(x: f64) -> f64 {
    if x > LOG_CLAMP {
        1.0 / x
    } else {
        0.0
    }
}

impl<'a> Builder<'a> {
    fn new(pred: &[f64], w: usize, h: usize, y: &'a [f64], y_skel: Vec<f64>, params: LossParams, frozen: Frozen) -> Self {
        let mut tape = Tape::new(w, h);
        let p = tape.leaf(pred.to_vec());
        Self {
            w,
            h,
            tape,
            p,
            y,
            y_skel,
            params,
            p_skel: None,
            frozen_in: frozen,
            frozen_out: Frozen::default(),
            seeds: Vec::new(),
            direct: vec![0.0; w * h],
            clamp_flags: Vec::new(),
            degenerate: false,
        }
    }

    fn pv(&self) -> &[f64] {
        self.tape.value(self.p)
    }

    fn n(&self) -> f64 {
        (self.w * self.h) as f64
    }

    fn seed(&mut self, v: Var, g: Vec<f64>) {
        self.seeds.push((v, g));
    }

    fn soft_skel(&mut self) -> Var {
        if let Some(s) = self.p_skel {
            return s;
        }
        let s = soft_skeleton_on(&mut self.tape, self.p, self.params.r_max);
        self.p_skel = Some(s);
        s
    }

    fn dice(&mut self, weight: f64) -> f64 {
        let (mut inter, mut union) = (0.0, 0.0);
        for (&p, &y) in self.pv().iter().zip(self.y) {
            inter += p * y;
            union += p * p + y * y;
        }
        if union == 0.0 {
            return 0.0;
        }
        let u2 = union * union;
        let grads: Vec<f64> = self
            .pv()
            .iter()
            .zip(self.y)
            .map(|(&p, &y)| -2.0 * (y * union - 2.0 * inter * p) / u2)
            .collect();
        for (d, g) in self.direct.iter_mut().zip(grads) {
            *d += weight * g;
        }
        1.0 - 2.0 * inter / union
    }

    /// `-(1/N) sum(w1 log P + w0 log(1 - P))` with per-pixel class weights.
    fn weighted_bce(&mut self, weight: f64, w1: &[f64], w0: &[f64]) -> f64 {
        let n = self.n();
        let mut sum = 0.0;
        let mut flags = Vec::with_capacity(2 * self.w * self.h);
        let mut grads = Vec::with_capacity(self.w * self.h);
        for (i, &p) in self.pv().iter().enumerate() {
            sum += w1[i] * log_clamped(p) + w0[i] * log_clamped(1.0 - p);
            grads.push(-(w1[i] * dlog_clamped(p) - w0[i] * dlog_clamped(1.0 - p)) / n);
            flags.push((p > LOG_CLAMP) as u32);
            flags.push((1.0 - p > LOG_CLAMP) as u32);
        }
        for (d, g) in self.direct.iter_mut().zip(grads) {
            *d += weight * g;
        }
        self.clamp_flags.extend(flags);
        -sum / n
    }

    fn bce(&mut self, weight: f64) -> f64 {
        let a = self.params.alpha;
        let w1: Vec<f64> = self.y.iter().map(|&y| a * y).collect();
        let w0: Vec<f64> = self.y.iter().map(|&y| (1.0 - a) * (1.0 - y)).collect();
        self.weighted_bce(weight, &w1, &w0)
    }

    /// Soft clDice with additive smoothing of 1 in both ratios.
    fn soft_cldice(&mut self, weight: f64) -> f64 {
        let s = self.soft_skel();
        let sp = self.tape.value(s);
        let (mut a, mut b) = (0.0, 0.0);
        for (&v, &y) in sp.iter().zip(self.y) {
            a += v * y;
            b += v;
        }
        let (mut c, mut d) = (0.0, 0.0);
        for (&p, &ys) in self.pv().iter().zip(&self.y_skel) {
            c += ys * p;
            d += ys;
        }
        let tprec = (a + 1.0) / (b + 1.0);
        let tsens = (c + 1.0) / (d + 1.0);
        let sum = tprec + tsens;
        let cl = 2.0 * tprec * tsens / sum;
        // Loss contribution is weight * (1 - cl).
        let dprec = -weight * 2.0 * tsens * tsens / (sum * sum);
        let dsens = -weight * 2.0 * tprec * tprec / (sum * sum);
        let g_skel: Vec<f64> = self
            .y
            .iter()
            .map(|&y| dprec * (y * (b + 1.0) - (a + 1.0)) / ((b + 1.0) * (b + 1.0)))
            .collect();
        self.seed(s, g_skel);
        for (dir, &ys) in self.direct.iter_mut().zip(&self.y_skel) {
            *dir += dsens * ys / (d + 1.0);
        }
        1.0 - cl
    }

    fn cldice(&mut self, weight: f64) -> f64 {
        let a1 = self.params.alpha1;
        a1 * self.dice(weight * a1) + (1.0 - a1) * self.soft_cldice(weight * (1.0 - a1))
    }

    fn clbce(&mut self, weight: f64) -> f64 {
        let (a, b) = (self.params.alpha1, self.params.beta);
        let s = self.soft_skel();
        let sp = self.tape.value(s).to_vec();
        let w1: Vec<f64> = self
            .y
            .iter()
            .zip(&self.y_skel)
            .map(|(&y, &ys)| a * y + b * ys)
            .collect();
        // Predicted centreline pixels count as false positives only where the
        // ground truth is background.
        let w0: Vec<f64> = self
            .y
            .iter()
            .zip(&sp)
            .map(|(&y, &ps)| (1.0 - a) * (1.0 - y) + (1.0 - b) * ps * (1.0 - y))
            .collect();
        let n = self.n();
        let g_skel: Vec<f64> = self
            .pv()
            .iter()
            .zip(self.y)
            .map(|(&p, &y)| -weight * (1.0 - b) * (1.0 - y) * log_clamped(1.0 - p) / n)
            .collect();
        self.seed(s, g_skel);
        self.weighted_bce(weight, &w1, &w0)
    }

    fn tsens(&mut self, weight: f64, schedule: &WeightSchedule) -> f64 {
        let mass: f64 = self.y_skel.iter().sum();
        if mass == 0.0 {
            self.degenerate = true;
            return 0.0;
        }
        let mut numerator = 0.0;
        let mut dilated = self.p;
        for r in 1..=schedule.r_max() {
            dilated = self.tape.dilate(dilated);
            let mut closed = dilated;
            for _ in 0..r {
                closed = self.tape.erode(closed);
            }
            let eps = schedule.eps(r);
            let cv = self.tape.value(closed);
            let pv = self.tape.value(self.p);
            numerator += eps
                * cv.iter()
                    .zip(pv)
                    .zip(&self.y_skel)
                    .map(|((&c, &p), &ys)| (c - p) * ys)
                    .sum::<f64>();
            let g = self.y_skel.iter().map(|&ys| weight * eps * ys / mass).collect();
            self.seed(closed, g);
        }
        let total = schedule.w(1);
        for (d, &ys) in self.direct.iter_mut().zip(&self.y_skel) {
            *d -= weight * total * ys / mass;
        }
        numerator / mass
    }

    fn tprec(&mut self, weight: f64, schedule: &WeightSchedule) -> f64 {
        let (w, h) = (self.w, self.h);
        let mut gaps = vec![0.0; w * h];
        for r in 1..=schedule.r_max() {
            let c = closing_values(self.y, w, h, r);
            for ((g, &c), &y) in gaps.iter_mut().zip(&c).zip(self.y) {
                *g += schedule.eps(r) * (c - y);
            }
        }
        let s = self.soft_skel();
        let sp = self.tape.value(s);
        let mass = self
            .frozen_in
            .soft_skeleton_mass
            .unwrap_or_else(|| sp.iter().sum());
        self.frozen_out.soft_skeleton_mass = Some(mass);
        if mass == 0.0 {
            self.degenerate = true;
            return 0.0;
        }
        let numerator: f64 = gaps.iter().zip(sp).map(|(g, s)| g * s).sum();
        let g = gaps.iter().map(|&g| weight * g / mass).collect();
        self.seed(s, g);
        numerator / mass
    }

    fn topo(&mut self, weight: f64) -> Result<f64> {
        let schedule = WeightSchedule::new(self.params.r_max)?;
        let a2 = self.params.alpha2;
        let sens = self.tsens(weight * a2, &schedule);
        let prec = self.tprec(weight * (1.0 - a2), &schedule);
        Ok(a2 * sens + (1.0 - a2) * prec)
    }

    fn term(&mut self, kind: LossKind, weight: f64) -> Result<f64> {
        let schedule = || WeightSchedule::new(self.params.r_max);
        Ok(match kind {
            LossKind::Dice => self.dice(weight),
            LossKind::Bce => self.bce(weight),
            LossKind::ClDice => self.cldice(weight),
            LossKind::ClBce => self.clbce(weight),
            LossKind::Tsens => {
                let s = schedule()?;
                self.tsens(weight, &s)
            }
            LossKind::Tprec => {
                let s = schedule()?;
                self.tprec(weight, &s)
            }
            LossKind::Topo => self.topo(weight)?,
            LossKind::PropDice => {
                let c = self.params.c;
                self.cldice(weight) + c * self.topo(weight * c)?
            }
            LossKind::PropBce => {
                let c = self.params.c;
                self.clbce(weight) + c * self.topo(weight * c)?
            }
        })
    }

    fn finish(self, value: f64, want_gradient: bool) -> Evaluation {
        let mut signature = self.tape.signature();
        signature.extend_from_slice(&self.clamp_flags);
        let gradient = want_gradient.then(|| {
            let mut g = self.tape.backward(self.seeds, self.p);
            for (g, d) in g.iter_mut().zip(&self.direct) {
                *g += d;
            }
            g
        });
        Evaluation {
            value,
            gradient,
            degenerate: self.degenerate,
            frozen: self.frozen_out,
            signature,
        }
    }
}

fn binary_values(truth: &BinaryMask) -> Vec<f64> {
    truth.data().iter().map(|&b| b as u8 as f64).collect()
}

struct Prepared {
    w: usize,
    h: usize,
    y: Vec<f64>,
    y_skel: Vec<f64>,
}

fn prepare(pred: &ProbMap, truth: &BinaryMask, params: &LossParams) -> Result<Prepared> {
    pred.ensure_same_dims(truth)?;
    params.validate()?;
    Ok(Prepared {
        w: pred.width(),
        h: pred.height(),
        y: binary_values(truth),
        y_skel: binary_values(&skeletonize(truth)),
    })
}

fn evaluate_raw(
    kind: LossKind,
    pred: &[f64],
    prep: &Prepared,
    params: LossParams,
    frozen: Frozen,
    want_gradient: bool,
) -> Result<Evaluation> {
    let mut b = Builder::new(pred, prep.w, prep.h, &prep.y, prep.y_skel.clone(), params, frozen);
    let value = b.term(kind, 1.0)?;
    Ok(b.finish(value, want_gradient))
}

/// Evaluates a loss, optionally with its gradient with respect to `pred`.
pub fn loss(
    kind: LossKind,
    pred: &ProbMap,
    truth: &BinaryMask,
    params: &LossParams,
    want_gradient: bool,
) -> Result<LossValue> {
    let prep = prepare(pred, truth, params)?;
    let e = evaluate_raw(kind, pred.values(), &prep, *params, Frozen::default(), want_gradient)?;
    Ok(LossValue {
        value: e.value,
        gradient: e
            .gradient
            .map(|g| RealGrid::new(prep.w, prep.h, g).expect("dims match")),
        degenerate: e.degenerate,
    })
}

macro_rules! loss_fn {
    ($(#[$doc:meta])* $name:ident, $kind:expr) => {
        $(#[$doc])*
        pub fn $name(pred: &ProbMap, truth: &BinaryMask, params: &LossParams) -> Result<LossValue> {
            loss($kind, pred, truth, params, true)
        }
    };
}

loss_fn!(
    /// Soft Dice loss.
    loss_dice, LossKind::Dice);
loss_fn!(
    /// Cross-entropy weighted by `alpha` on foreground.
    loss_bce, LossKind::Bce);
loss_fn!(
    /// Dice blended with soft clDice by `alpha1`.
    loss_cldice, LossKind::ClDice);
loss_fn!(
    /// Centreline-weighted cross-entropy (`alpha1`, `beta`).
    loss_clbce, LossKind::ClBce);
loss_fn!(
    /// Gap penalty along the ground-truth skeleton.
    loss_tsens, LossKind::Tsens);
loss_fn!(
    /// Bridge penalty along the predicted soft skeleton.
    loss_tprec, LossKind::Tprec);
loss_fn!(
    /// `alpha2 tsens + (1 - alpha2) tprec`.
    loss_topo, LossKind::Topo);
loss_fn!(
    /// `cldice + c topo`.
    loss_propdice, LossKind::PropDice);
loss_fn!(
    /// `clbce + c topo`.
    loss_propbce, LossKind::PropBce);

/// Why a pixel was left out of a gradient check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// `P ± step` leaves the open interval (0, 1).
    OutsideUnitInterval,
    /// A neighbor's value is within twice the step.
    NearTie,
    /// The perturbation changes a max/min selection, a relu activation or a
    /// log clamp.
    RoutingChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub row: usize,
    pub col: usize,
    pub reason: ExclusionReason,
}

/// Analytic versus central finite-difference gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`
    /// over the checked pixels (0 when none were checked).
    pub max_rel_error: f64,
    pub checked: usize,
    pub excluded: Vec<Exclusion>,
}

/// Smallest denominator of the relative error.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient of `kind` with central differences of
/// step `step` at every pixel, holding frozen normalizers fixed.
pub fn gradient_check(
    kind: LossKind,
    pred: &ProbMap,
    truth: &BinaryMask,
    params: &LossParams,
    step: f64,
) -> Result<GradientCheck> {
    if !(step > 0.0 && step < 0.5) {
        return Err(Error::InvalidParameter {
            name: "step",
            reason: format!("{step} must lie in (0, 0.5)"),
        });
    }
    let prep = prepare(pred, truth, params)?;
    let base = evaluate_raw(kind, pred.values(), &prep, *params, Frozen::default(), true)?;
    let analytic = base.gradient.expect("requested");
    let (w, h) = (prep.w, prep.h);
    let values = pred.values();
    let mut excluded = Vec::new();
    let mut max_rel: f64 = 0.0;
    let mut checked = 0;
    let mut perturbed = values.to_vec();

    for k in 0..w * h {
        let px = Pixel::new(k / w, k % w);
        let exclude = |reason| Exclusion {
            row: px.row,
            col: px.col,
            reason,
        };
        let v = values[k];
        if v - step <= 0.0 || v + step >= 1.0 {
            excluded.push(exclude(ExclusionReason::OutsideUnitInterval));
            continue;
        }
        if kind.uses_morphology() {
            let near = crate::mask::NEIGHBORS_8.iter().any(|&(dr, dc)| {
                pred.offset(px, dr, dc)
                    .is_some_and(|q| (pred.get(q) - v).abs() < 2.0 * step)
            });
            if near {
                excluded.push(exclude(ExclusionReason::NearTie));
                continue;
            }
        }
        perturbed[k] = v + step;
        let plus = evaluate_raw(kind, &perturbed, &prep, *params, base.frozen, false)?;
        perturbed[k] = v - step;
        let minus = evaluate_raw(kind, &perturbed, &prep, *params, base.frozen, false)?;
        perturbed[k] = v;
        if plus.signature != base.signature || minus.signature != base.signature {
            excluded.push(exclude(ExclusionReason::RoutingChange));
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * step);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        max_rel = max_rel.max(rel);
        checked += 1;
    }
    Ok(GradientCheck {
        max_rel_error: max_rel,
        checked,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
    }

    fn random_soft(w: usize, h: usize, seed: u64) -> ProbMap {
        let mut s = seed | 1;
        let values = (0..w * h)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                0.02 + 0.96 * (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        ProbMap::new(w, h, values).unwrap()
    }

    #[test]
    fn schedule_small_radii() {
        let s = WeightSchedule::new(2).unwrap();
        assert_eq!(s.weights(), &[4.0, 1.0]);
        assert_eq!(s.increments(), &[3.0, 1.0]);
        let s = WeightSchedule::new(1).unwrap();
        assert_eq!((s.w(1), s.eps(1)), (1.0, 1.0));
        assert!(WeightSchedule::new(0).is_err());
    }

    #[test]
    fn schedule_radius_three() {
        // w2 = 1 * 6 / 3, w1 = w2 * 4 / 1.
        let s = WeightSchedule::new(3).unwrap();
        assert_eq!(s.weights(), &[8.0, 2.0, 1.0]);
        assert_eq!(s.increments(), &[6.0, 1.0, 1.0]);
    }

    #[test]
    fn schedule_identities() {
        for r_max in 1..=12 {
            let s = WeightSchedule::new(r_max).unwrap();
            for r in 1..r_max {
                let lhs = s.w(r) * (2 * r - 1) as f64;
                let rhs = s.w(r + 1) * (2 * r + 2) as f64;
                assert!(close(lhs, rhs), "r_max {r_max}, r {r}");
            }
            let telescoped: f64 = s.increments().iter().sum();
            assert!(close(telescoped, s.w(1)));
            assert!(s.increments().iter().all(|&e| e >= 0.0));
        }
    }

    #[test]
    fn loss_names_round_trip() {
        for k in LossKind::ALL {
            assert_eq!(k.name().parse::<LossKind>().unwrap(), k);
        }
        assert_eq!("loss_propbce".parse::<LossKind>().unwrap(), LossKind::PropBce);
        assert!("focal".parse::<LossKind>().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(LossParams::default().validate().is_ok());
        let bad = LossParams {
            beta: 1.5,
            ..LossParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = LossParams {
            r_max: 0,
            ..LossParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dice_of_identical_binary_masks_is_zero() {
        let y = BinaryMask::from_fn(9, 9, |p| p.row == 4 || p.col == 2).unwrap();
        let v = loss_dice(&ProbMap::from(&y), &y, &LossParams::default()).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn bce_of_identical_binary_masks_is_zero() {
        let y = BinaryMask::from_fn(9, 9, |p| p.row == 4).unwrap();
        let v = loss_bce(&ProbMap::from(&y), &y, &LossParams::default()).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn composite_losses_add_up() {
        let p = random_soft(10, 10, 3);
        let y = BinaryMask::from_fn(10, 10, |q| q.row == 5 || q.col == 3).unwrap();
        let params = LossParams::default();
        let value = |k| loss(k, &p, &y, &params, false).unwrap().value;
        let topo = value(LossKind::Topo);
        assert!(close(value(LossKind::PropBce), value(LossKind::ClBce) + 0.1 * topo));
        assert!(close(value(LossKind::PropDice), value(LossKind::ClDice) + 0.1 * topo));
        let mix = 0.5 * value(LossKind::Tsens) + 0.5 * value(LossKind::Tprec);
        assert!(close(topo, mix));
    }

    #[test]
    fn gradient_has_input_shape() {
        let p = random_soft(7, 5, 8);
        let y = BinaryMask::from_fn(7, 5, |q| q.row == 2).unwrap();
        let v = loss_topo(&p, &y, &LossParams::default()).unwrap();
        let g = v.gradient.unwrap();
        assert_eq!(g.dims(), (7, 5));
        assert!(g.values().iter().all(|x| x.is_finite()));
        let without = loss(LossKind::Topo, &p, &y, &LossParams::default(), false).unwrap();
        assert!(without.gradient.is_none());
        assert_eq!(without.value, v.value);
    }

    #[test]
    fn error_map_of_gap_free_prediction_is_zero() {
        let y = BinaryMask::from_fn(12, 12, |p| p.row == 6 || p.col == 6).unwrap();
        let s = WeightSchedule::new(3).unwrap();
        let e = error_map(&ProbMap::from(&y), &skeletonize(&y), &s).unwrap();
        assert_eq!(e.sum(), 0.0);
    }

    #[test]
    fn single_pixel_gap_collects_first_weight() {
        let y = BinaryMask::from_fn(15, 7, |p| p.row == 3 && (2..13).contains(&p.col)).unwrap();
        let mut pred = y.clone();
        pred.set(Pixel::new(3, 7), false);
        let s = WeightSchedule::new(3).unwrap();
        let e = error_map(&ProbMap::from(&pred), &skeletonize(&y), &s).unwrap();
        // Closed from radius 1 on: eps1 + eps2 + eps3 = w1.
        assert_eq!(e.get(Pixel::new(3, 7)), s.w(1));
        assert_eq!(e.get(Pixel::new(3, 7)), 8.0);
        assert_eq!(e.sum(), 8.0);
    }

    #[test]
    fn constant_prediction_excludes_everything() {
        let p = ProbMap::new(6, 6, vec![0.4; 36]).unwrap();
        let y = BinaryMask::from_fn(6, 6, |q| q.row == 3).unwrap();
        let r = gradient_check(LossKind::Topo, &p, &y, &LossParams { r_max: 3, ..Default::default() }, 1e-5)
            .unwrap();
        assert_eq!(r.checked, 0);
        assert_eq!(r.excluded.len(), 36);
        assert!(r.excluded.iter().all(|e| e.reason == ExclusionReason::NearTie));
    }

    #[test]
    fn dice_gradient_matches_finite_differences() {
        let p = random_soft(8, 8, 21);
        let y = BinaryMask::from_fn(8, 8, |q| (q.row + q.col) % 3 == 0).unwrap();
        let r = gradient_check(LossKind::Dice, &p, &y, &LossParams::default(), 1e-5).unwrap();
        assert_eq!(r.checked, 64);
        assert!(r.max_rel_error <= 1e-4, "{}", r.max_rel_error);
    }

    #[test]
    fn topo_gradient_matches_finite_differences() {
        let p = random_soft(12, 12, 5);
        let y = BinaryMask::from_fn(12, 12, |q| q.row == 6 || q.col == 4 || q.col == 9).unwrap();
        let params = LossParams {
            r_max: 3,
            ..Default::default()
        };
        let r = gradient_check(LossKind::Topo, &p, &y, &params, 1e-5).unwrap();
        assert!(r.checked > 100, "only {} checked", r.checked);
        assert!(r.max_rel_error <= 1e-4, "{}", r.max_rel_error);
    }
}
