//! Raster containers: binary masks, labeled masks, probability maps and
//! distance fields. All grids are row-major.

use crate::error::{Error, Result};

/// A pixel position, ordered by row first and column second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// True when `other` is one of the eight neighbors of `self`.
    pub fn is_neighbor(self, other: Pixel) -> bool {
        self != other && self.row.abs_diff(other.row) <= 1 && self.col.abs_diff(other.col) <= 1
    }
}

impl From<(usize, usize)> for Pixel {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

/// Row/column offsets of the 8-neighborhood in raster order.
pub(crate) const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::DataLength { len, width, height });
    }
    Ok(())
}

/// Grid geometry shared by every raster type.
pub trait Grid {
    fn width(&self) -> usize;
    fn height(&self) -> usize;

    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn len(&self) -> usize {
        self.width() * self.height()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn index_of(&self, p: Pixel) -> usize {
        p.row * self.width() + p.col
    }

    fn pixel_at(&self, index: usize) -> Pixel {
        Pixel::new(index / self.width(), index % self.width())
    }

    fn contains(&self, p: Pixel) -> bool {
        p.row < self.height() && p.col < self.width()
    }

    /// Neighbor of `p` displaced by `(dr, dc)`, if inside the grid.
    fn offset(&self, p: Pixel, dr: isize, dc: isize) -> Option<Pixel> {
        let row = p.row.checked_add_signed(dr)?;
        let col = p.col.checked_add_signed(dc)?;
        (row < self.height() && col < self.width()).then_some(Pixel::new(row, col))
    }

    fn ensure_same_dims(&self, other: &impl Grid) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

macro_rules! impl_grid {
    ($ty:ty) => {
        impl Grid for $ty {
            fn width(&self) -> usize {
                self.width
            }
            fn height(&self) -> usize {
                self.height
            }
        }
    };
}

/// Two-dimensional boolean grid; `true` marks a vessel (foreground) pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl_grid!(BinaryMask);

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// All-background mask.
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(Pixel) -> bool,
    ) -> Result<Self> {
        let data = (0..width * height)
            .map(|i| f(Pixel::new(i / width.max(1), i % width.max(1))))
            .collect();
        Self::new(width, height, data)
    }

    /// Parses an ASCII picture: `#` or `1` is foreground, anything else is
    /// background. Rows are separated by newlines; blank lines are skipped
    /// and leading/trailing whitespace is trimmed.
    pub fn from_ascii(art: &str) -> Result<Self> {
        let rows: Vec<&str> = art
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut data = Vec::with_capacity(width * height);
        for row in &rows {
            if row.chars().count() != width {
                return Err(Error::DataLength {
                    len: row.chars().count(),
                    width,
                    height,
                });
            }
            data.extend(row.chars().map(|c| c == '#' || c == '1'));
        }
        Self::new(width, height, data)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, p: Pixel) -> bool {
        self.data[self.index_of(p)]
    }

    /// Out-of-grid positions read as background.
    pub fn get_or_background(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            return false;
        }
        self.data[row as usize * self.width + col as usize]
    }

    pub fn set(&mut self, p: Pixel, value: bool) {
        let i = self.index_of(p);
        self.data[i] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_all_background(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Foreground pixels in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| self.pixel_at(i))
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Pixel-wise complement.
    pub fn invert(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    /// Renders the mask with `#` for foreground and `.` for background.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for row in self.data.chunks(self.width) {
            out.extend(row.iter().map(|&v| if v { '#' } else { '.' }));
            out.push('\n');
        }
        out
    }
}

/// Connected-component labels: 0 is background, `1..=component_count`
/// identify 8-connected foreground components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledMask {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    component_count: u32,
}

impl_grid!(LabeledMask);

impl LabeledMask {
    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        labels: Vec<u32>,
        component_count: u32,
    ) -> Self {
        debug_assert_eq!(labels.len(), width * height);
        Self {
            width,
            height,
            labels,
            component_count,
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, p: Pixel) -> u32 {
        self.labels[self.index_of(p)]
    }

    pub fn component_count(&self) -> u32 {
        self.component_count
    }

    /// Pixel count of every component, indexed by `label - 1`.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.component_count as usize];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

/// Soft prediction with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl_grid!(ProbMap);

impl ProbMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange { index, value });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, p: Pixel) -> f64 {
        self.values[self.index_of(p)]
    }

    /// Hard threshold: `value >= threshold` is foreground.
    pub fn threshold(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.values.iter().map(|&v| v >= threshold).collect(),
        }
    }
}

impl From<&BinaryMask> for ProbMap {
    fn from(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width,
            height: mask.height,
            values: mask
                .data
                .iter()
                .map(|&v| if v { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Euclidean distance from each pixel to the nearest background pixel.
/// Zero exactly on background.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl_grid!(DistanceField);

impl DistanceField {
    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>) -> Self {
        Self {
            width,
            height,
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, p: Pixel) -> f64 {
        self.values[self.index_of(p)]
    }
}

/// Non-negative real grid used for visit counts, error maps and gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl_grid!(RealGrid);

impl RealGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, p: Pixel) -> f64 {
        self.values[self.index_of(p)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}
