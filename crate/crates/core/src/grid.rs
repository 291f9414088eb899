//! North-up uniform grids and world/pixel conversions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A north-up grid of square cells in a projected metric system.
///
/// `(origin_x, origin_y)` is the top-left corner. Cell `(col, row)` covers
/// `x ∈ [origin_x + col·s, origin_x + (col+1)·s)` and
/// `y ∈ (origin_y − (row+1)·s, origin_y − row·s]`, so rows grow southward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridSpec<T: Scalar> {
    pub crs_tag: String,
    pub origin_x: T,
    pub origin_y: T,
    pub spacing: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(origin_x: T, origin_y: T, spacing: T, width: usize, height: usize) -> Result<Self> {
        let grid = GridSpec { crs_tag: String::new(), origin_x, origin_y, spacing, width, height };
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_crs(mut self, crs_tag: impl Into<String>) -> Self {
        self.crs_tag = crs_tag.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > T::zero()) || !self.spacing.is_finite() {
            return Err(Error::NonPositiveSpacing(self.spacing.to_f64_lossy()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        if !self.origin_x.is_finite() || !self.origin_y.is_finite() {
            return Err(Error::InvalidGrid("origin is not finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// World coordinates of the center of `(col, row)`.
    #[inline]
    pub fn pixel_center(&self, col: usize, row: usize) -> (T, T) {
        let half = T::from_f64_lossy(0.5);
        (
            self.origin_x + (T::from_usize_lossy(col) + half) * self.spacing,
            self.origin_y - (T::from_usize_lossy(row) + half) * self.spacing,
        )
    }

    /// `(min_x, min_y, max_x, max_y)` of the covered area.
    pub fn bounds(&self) -> (T, T, T, T) {
        let max_x = self.origin_x + T::from_usize_lossy(self.width) * self.spacing;
        let min_y = self.origin_y - T::from_usize_lossy(self.height) * self.spacing;
        (self.origin_x, min_y, max_x, self.origin_y)
    }

    /// Cell area in square meters.
    pub fn cell_area(&self) -> T {
        self.spacing * self.spacing
    }

    /// Origin, spacing, dimensions and CRS all agree.
    pub fn same_as(&self, other: &GridSpec<T>) -> bool {
        self == other
    }

    pub fn cast<U: Scalar>(&self) -> GridSpec<U> {
        GridSpec {
            crs_tag: self.crs_tag.clone(),
            origin_x: U::from_f64_lossy(self.origin_x.to_f64_lossy()),
            origin_y: U::from_f64_lossy(self.origin_y.to_f64_lossy()),
            spacing: U::from_f64_lossy(self.spacing.to_f64_lossy()),
            width: self.width,
            height: self.height,
        }
    }

    /// Grid of `size`×`size` cells whose top-left cell is `(col, row)` of `self`.
    /// The window may extend past the parent's extent.
    pub fn window(&self, col: usize, row: usize, size: usize) -> GridSpec<T> {
        GridSpec {
            crs_tag: self.crs_tag.clone(),
            origin_x: self.origin_x + T::from_usize_lossy(col) * self.spacing,
            origin_y: self.origin_y - T::from_usize_lossy(row) * self.spacing,
            spacing: self.spacing,
            width: size,
            height: size,
        }
    }
}

/// Smallest grid with the given spacing whose origin is `(min_x, max_y)` and
/// which covers the box `[min_x, max_x) × (min_y, max_y]`.
pub fn grid_from_extent<T: Scalar>(min_x: T, min_y: T, max_x: T, max_y: T, spacing: T) -> Result<GridSpec<T>> {
    if !(spacing > T::zero()) || !spacing.is_finite() {
        return Err(Error::NonPositiveSpacing(spacing.to_f64_lossy()));
    }
    if !(max_x > min_x) || !(max_y > min_y) {
        return Err(Error::DegenerateExtent);
    }
    let width = ((max_x - min_x) / spacing).ceil();
    let height = ((max_y - min_y) / spacing).ceil();
    let width = width.to_usize().ok_or_else(|| Error::InvalidGrid("extent too large for spacing".into()))?.max(1);
    let height = height.to_usize().ok_or_else(|| Error::InvalidGrid("extent too large for spacing".into()))?.max(1);
    GridSpec::new(min_x, max_y, spacing, width, height)
}

/// Cell containing `(x, y)`, or `None` when the point is outside the grid.
pub fn world_to_pixel<T: Scalar>(grid: &GridSpec<T>, x: T, y: T) -> Option<(usize, usize)> {
    let fx = ((x - grid.origin_x) / grid.spacing).floor();
    let fy = ((grid.origin_y - y) / grid.spacing).floor();
    if !(fx >= T::zero()) || !(fy >= T::zero()) {
        return None;
    }
    let col = fx.to_usize()?;
    let row = fy.to_usize()?;
    (col < grid.width && row < grid.height).then_some((col, row))
}
