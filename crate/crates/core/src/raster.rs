//! In-memory rasters on a [`GridSpec`].

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::scalar::Scalar;

/// Label value for pixels without a class.
pub const UNLABELED: u8 = 255;

/// Row-major scalar field; NaN marks NoData.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarRaster<T: Scalar> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> ScalarRaster<T> {
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(ScalarRaster { grid, values })
    }

    pub fn filled(grid: GridSpec<T>, value: T) -> Self {
        let values = vec![value; grid.len()];
        ScalarRaster { grid, values }
    }

    pub fn nodata(grid: GridSpec<T>) -> Self {
        Self::filled(grid, T::nodata())
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> T {
        self.values[self.grid.index(col, row)]
    }

    pub fn nodata_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nodata()).count()
    }
}

/// Per-class probability field. Every non-NoData value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRaster<T: Scalar> {
    pub class_id: usize,
    raster: ScalarRaster<T>,
}

impl<T: Scalar> ProbabilityRaster<T> {
    pub fn new(grid: GridSpec<T>, class_id: usize, values: Vec<T>) -> Result<Self> {
        Self::from_raster(class_id, ScalarRaster::new(grid, values)?)
    }

    pub fn from_raster(class_id: usize, raster: ScalarRaster<T>) -> Result<Self> {
        if let Some((index, v)) =
            raster.values.iter().enumerate().find(|(_, v)| !v.is_nodata() && !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::ValueOutOfRange { index, value: v.to_f64_lossy() });
        }
        Ok(ProbabilityRaster { class_id, raster })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.raster.grid
    }

    pub fn values(&self) -> &[T] {
        &self.raster.values
    }

    pub fn as_raster(&self) -> &ScalarRaster<T> {
        &self.raster
    }

    pub fn into_raster(self) -> ScalarRaster<T> {
        self.raster
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> T {
        self.raster.get(col, row)
    }

    pub fn nodata_count(&self) -> usize {
        self.raster.nodata_count()
    }
}

/// One class index per pixel, [`UNLABELED`] where no class applies.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRaster<T: Scalar> {
    pub grid: GridSpec<T>,
    pub labels: Vec<u8>,
}

impl<T: Scalar> LabelRaster<T> {
    pub fn new(grid: GridSpec<T>, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: labels.len() });
        }
        Ok(LabelRaster { grid, labels })
    }

    pub fn unlabeled(grid: GridSpec<T>) -> Self {
        let labels = vec![UNLABELED; grid.len()];
        LabelRaster { grid, labels }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.labels[self.grid.index(col, row)]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, label: u8) {
        let i = self.grid.index(col, row);
        self.labels[i] = label;
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != UNLABELED).count()
    }

    /// Pixel count per class index; labels outside the catalog are rejected.
    pub fn class_counts(&self, catalog: &ClassCatalog) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; catalog.len()];
        for &l in &self.labels {
            if l == UNLABELED {
                continue;
            }
            match counts.get_mut(l as usize) {
                Some(c) => *c += 1,
                None => return Err(Error::LabelOutOfCatalog { label: l }),
            }
        }
        Ok(counts)
    }

    pub fn validate(&self, catalog: &ClassCatalog) -> Result<()> {
        match self.labels.iter().find(|&&l| !catalog.is_valid_label(l)) {
            Some(&label) => Err(Error::LabelOutOfCatalog { label }),
            None => Ok(()),
        }
    }
}
