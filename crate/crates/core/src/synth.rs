//! Synthetic vessel trees drawn from thick line segments, with the three
//! classic error types applied to copies of the reference tree.

use serde::{Deserialize, Serialize};

use crate::mask::BinaryMask;

/// A segment with round caps: every pixel centre within `radius` of the
/// segment is foreground. Coordinates are (row, column).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub radius: f64,
}

impl Stroke {
    pub fn new(from: (f64, f64), to: (f64, f64), radius: f64) -> Self {
        Self { from, to, radius }
    }

    fn distance(&self, r: f64, c: f64) -> f64 {
        let (dr, dc) = (self.to.0 - self.from.0, self.to.1 - self.from.1);
        let len2 = dr * dr + dc * dc;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((r - self.from.0) * dr + (c - self.from.1) * dc) / len2).clamp(0.0, 1.0)
        };
        let (pr, pc) = (self.from.0 + t * dr, self.from.1 + t * dc);
        ((r - pr).powi(2) + (c - pc).powi(2)).sqrt()
    }

    /// Point at fraction `t` along the stroke.
    fn at(&self, t: f64) -> (f64, f64) {
        (
            self.from.0 + t * (self.to.0 - self.from.0),
            self.from.1 + t * (self.to.1 - self.from.1),
        )
    }

    fn length(&self) -> f64 {
        (self.to.0 - self.from.0).hypot(self.to.1 - self.from.1)
    }

    /// The stroke with `gap` pixels of axis removed around fraction `t`,
    /// leaving a background break that round caps of this radius do not
    /// bridge.
    fn split(&self, t: f64, gap: f64) -> [Stroke; 2] {
        let half = (gap / 2.0 + self.radius) / self.length();
        [
            Stroke::new(self.from, self.at(t - half), self.radius),
            Stroke::new(self.at(t + half), self.to, self.radius),
        ]
    }

    /// The stroke with its last `cut` pixels of axis removed.
    fn shortened(&self, cut: f64) -> Stroke {
        Stroke::new(self.from, self.at(1.0 - cut / self.length()), self.radius)
    }
}

/// Rasterizes the union of `strokes`.
pub fn render(width: usize, height: usize, strokes: &[Stroke]) -> BinaryMask {
    BinaryMask::from_fn(width, height, |p| {
        strokes
            .iter()
            .any(|s| s.distance(p.row as f64, p.col as f64) <= s.radius + 1e-9)
    })
    .expect("non-zero dimensions")
}

/// A reference tree and three corrupted copies of it.
#[derive(Debug, Clone)]
pub struct TreeFixture {
    pub truth: BinaryMask,
    /// One terminal branch lost its last `k` pixels.
    pub missing_termination: BinaryMask,
    /// A spurious `k`-pixel branch sprouts from a major vessel.
    pub false_branch: BinaryMask,
    /// Two interior segments are interrupted by gaps of `k / 2` pixels.
    pub broken_segments: BinaryMask,
}

/// Strokes of a root trunk that bifurcates twice, calibre shrinking at each
/// level, designed on a 64x64 canvas and scaled by `size / 64`.
fn tree_strokes(size: usize) -> Vec<Stroke> {
    let s = size as f64 / 64.0;
    let p = |r: f64, c: f64| (r * s, c * s);
    let trunk = 1.5;
    let major = 1.0;
    let minor = 0.75;
    vec![
        Stroke::new(p(61.0, 32.0), p(40.0, 32.0), trunk),
        Stroke::new(p(40.0, 32.0), p(24.0, 16.0), major),
        Stroke::new(p(40.0, 32.0), p(24.0, 48.0), major),
        Stroke::new(p(24.0, 16.0), p(5.0, 7.0), minor),
        Stroke::new(p(24.0, 16.0), p(5.0, 25.0), minor),
        Stroke::new(p(24.0, 48.0), p(5.0, 39.0), minor),
        Stroke::new(p(24.0, 48.0), p(5.0, 57.0), minor),
    ]
}

const LEFT_MAJOR: usize = 1;
const RIGHT_MAJOR: usize = 2;
const OUTER_TERMINAL: usize = 3;

/// Builds the reference tree on a `size` x `size` canvas (`size` between 32
/// and 64) and its corrupted copies, each error removing or adding about
/// `k` centreline pixels.
pub fn vessel_tree(size: usize, k: usize) -> TreeFixture {
    assert!((32..=64).contains(&size), "tree canvas must be 32..=64 pixels");
    let base = tree_strokes(size);
    let k = k as f64;

    let mut missing = base.clone();
    missing[OUTER_TERMINAL] = base[OUTER_TERMINAL].shortened(k);

    let mut false_branch = base.clone();
    let root = base[0].at(0.45);
    false_branch.push(Stroke::new(root, (root.0, root.1 + k + 1.0), 0.75));

    let mut broken: Vec<Stroke> = base
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != LEFT_MAJOR && i != RIGHT_MAJOR)
        .map(|(_, s)| *s)
        .collect();
    broken.extend(base[LEFT_MAJOR].split(0.5, k / 2.0));
    broken.extend(base[RIGHT_MAJOR].split(0.5, k / 2.0));

    TreeFixture {
        truth: render(size, size, &base),
        missing_termination: render(size, size, &missing),
        false_branch: render(size, size, &false_branch),
        broken_segments: render(size, size, &broken),
    }
}
