//! Uniform sampling of same-component pixel pairs.
//!
//! Both endpoints are drawn independently and uniformly over the admissible
//! pixels; a draw is rejected when the endpoints coincide or lie in
//! different components. The accepted pair therefore falls in a component
//! with probability proportional to size * (size - 1).

use rand::Rng;

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Grid, LabeledMask, Pixel};
use crate::pathfind::PathGraph;

/// Upper bound on draws for a single accepted pair.
pub const REJECTION_CAP: usize = 1_000_000;

/// Admissible pixels in raster order with their component labels.
#[derive(Debug, Clone)]
pub struct PairSampler {
    pixels: Vec<Pixel>,
    component: Vec<u32>,
}

impl PairSampler {
    /// Fails with [`Error::NoValidPair`] unless some component holds at least
    /// two admissible pixels.
    pub fn from_labels(labels: &LabeledMask, admissible: &BinaryMask) -> Result<Self> {
        labels.ensure_same_dims(admissible)?;
        let pixels: Vec<Pixel> = admissible.foreground().collect();
        let component = pixels.iter().map(|&p| labels.label(p)).collect();
        Self::checked(pixels, component)
    }

    pub(crate) fn new(graph: &PathGraph) -> Result<Self> {
        let n = graph.node_count() as u32;
        Self::checked(
            (0..n).map(|k| graph.pixel(k)).collect(),
            (0..n).map(|k| graph.component(k)).collect(),
        )
    }

    fn checked(pixels: Vec<Pixel>, component: Vec<u32>) -> Result<Self> {
        let mut sorted = component.clone();
        sorted.sort_unstable();
        if !sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::NoValidPair);
        }
        Ok(Self { pixels, component })
    }

    pub fn pixel(&self, node: u32) -> Pixel {
        self.pixels[node as usize]
    }

    /// Draws one pair of admissible pixels as `(pixel, pixel)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Pixel, Pixel)> {
        let (a, b) = sample_pair(self, rng)?;
        Ok((self.pixel(a), self.pixel(b)))
    }
}

/// Draws a same-component pair of distinct admissible pixels, returned as
/// raster-order indices into the admissible set.
pub fn sample_pair<R: Rng + ?Sized>(sampler: &PairSampler, rng: &mut R) -> Result<(u32, u32)> {
    let n = sampler.pixels.len();
    for _ in 0..REJECTION_CAP {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j && sampler.component[i] == sampler.component[j] {
            return Ok((i as u32, j as u32));
        }
    }
    Err(Error::RejectionCap(REJECTION_CAP))
}
