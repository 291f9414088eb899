use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::raster::LabelRaster;
use crate::scalar::Scalar;

/// Colorizes a label raster with the catalog palette; unlabeled pixels are black.
pub fn label_image<T: Scalar>(raster: &LabelRaster<T>, catalog: &ClassCatalog) -> RgbImage {
    let palette = catalog.palette();
    let mut buf = Vec::with_capacity(raster.labels.len() * 3);
    for &l in &raster.labels {
        buf.extend_from_slice(&palette[l as usize]);
    }
    RgbImage::from_raw(raster.grid.width as u32, raster.grid.height as u32, buf).expect("buffer sized from grid")
}

pub fn write_label_png<T: Scalar>(path: &Path, raster: &LabelRaster<T>, catalog: &ClassCatalog) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    label_image(raster, catalog).save_with_format(path, ImageFormat::Png)?;
    Ok(())
}
