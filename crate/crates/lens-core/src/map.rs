//! Grid types shared by every other module: pixel coordinates, pixel
//! sets with deterministic order, attribution maps, and image tensors.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use crate::error::{CoreError, Result};

/// A pixel position, `row` before `col`.
///
/// The derived `Ord` is row-major, which doubles as the global
/// tie-breaking order: whenever two pixels compare equal on score, the
/// one earlier in row-major order wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub fn new(row: usize, col: usize) -> Self {
        PixelCoord { row, col }
    }

    /// Chebyshev (chessboard) distance; two pixels lie in each other's
    /// `(2w+1) x (2w+1)` window exactly when this is `<= w`.
    pub fn chebyshev(self, other: PixelCoord) -> usize {
        let dr = self.row.abs_diff(other.row);
        let dc = self.col.abs_diff(other.col);
        dr.max(dc)
    }
}

/// Clamped row/col ranges of the `(2w+1) x (2w+1)` window around `c`
/// inside a `height x width` grid.
pub(crate) fn window_bounds(
    c: PixelCoord,
    w: usize,
    height: usize,
    width: usize,
) -> (RangeInclusive<usize>, RangeInclusive<usize>) {
    let r0 = c.row.saturating_sub(w);
    let r1 = (c.row + w).min(height - 1);
    let c0 = c.col.saturating_sub(w);
    let c1 = (c.col + w).min(width - 1);
    (r0..=r1, c0..=c1)
}

/// A set of pixel positions with deterministic (row-major) iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PixelSet {
    coords: BTreeSet<PixelCoord>,
}

impl PixelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, c: PixelCoord) -> bool {
        self.coords.insert(c)
    }

    pub fn contains(&self, c: PixelCoord) -> bool {
        self.coords.contains(&c)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        self.coords.iter().copied()
    }

    /// Number of elements shared with `other`.
    pub fn intersection_size(&self, other: &PixelSet) -> usize {
        if self.len() <= other.len() {
            self.iter().filter(|c| other.contains(*c)).count()
        } else {
            other.iter().filter(|c| self.contains(*c)).count()
        }
    }

    /// `|self Δ other|`.
    pub fn symmetric_difference_size(&self, other: &PixelSet) -> usize {
        self.len() + other.len() - 2 * self.intersection_size(other)
    }
}

impl FromIterator<PixelCoord> for PixelSet {
    fn from_iter<T: IntoIterator<Item = PixelCoord>>(iter: T) -> Self {
        PixelSet { coords: iter.into_iter().collect() }
    }
}

/// A dense `height x width` grid of finite attribution scores,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl AttributionMap {
    /// Builds a map from row-major data, rejecting empty grids,
    /// length mismatches and non-finite entries.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CoreError::EmptyMap);
        }
        if data.len() != height * width {
            return Err(CoreError::Model(format!(
                "map data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite { what: "attribution value" });
        }
        Ok(AttributionMap { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        AttributionMap::new(height, width, vec![0.0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Total number of pixels.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty grids
    }

    pub fn value(&self, c: PixelCoord) -> f64 {
        debug_assert!(c.row < self.height && c.col < self.width);
        self.data[c.row * self.width + c.col]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Row-major coordinate stream.
    pub fn coords(&self) -> impl Iterator<Item = PixelCoord> + '_ {
        let width = self.width;
        (0..self.height * self.width).map(move |i| PixelCoord::new(i / width, i % width))
    }

    /// Same grid with `|.|` applied pointwise, for ranking magnitudes
    /// of signed attributions.
    pub fn abs(&self) -> AttributionMap {
        AttributionMap {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.abs()).collect(),
        }
    }

    pub(crate) fn check_same_dims(&self, other: &AttributionMap) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(CoreError::DimMismatch(
                self.height,
                self.width,
                other.height,
                other.width,
            ));
        }
        Ok(())
    }
}

/// A grayscale image with pixel values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CoreError::EmptyMap);
        }
        if data.len() != height * width {
            return Err(CoreError::Model(format!(
                "image data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if !data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(CoreError::NonFinite { what: "pixel value in [0,1]" });
        }
        Ok(ImageTensor { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }
}
