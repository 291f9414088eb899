use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::raster::{LabelRaster, UNLABELED};
use crate::scalar::Scalar;

/// Resamples `src` onto `dst_grid` by replicating the nearest source pixel.
///
/// The nearest source center wins, ties going to the smaller row and then
/// the smaller column. Destination centers outside the source extent are
/// unlabeled. Intended for `dst` spacing at or below `src` spacing; coarser
/// destinations still work but drop information.
pub fn upsample_nearest<T: Scalar>(src: &LabelRaster<T>, dst_grid: &GridSpec<T>) -> Result<LabelRaster<T>> {
    let (sx0, sy0, sx1, sy1) = src.grid.bounds();
    let (dx0, dy0, dx1, dy1) = dst_grid.bounds();
    if !(sx0 < dx1 && dx0 < sx1 && sy0 < dy1 && dy0 < sy1) {
        return Err(Error::NoOverlap);
    }
    let sg = &src.grid;
    let sw = sg.width as f64;
    let sh = sg.height as f64;
    let ox = sg.origin_x.to_f64_lossy();
    let oy = sg.origin_y.to_f64_lossy();
    let s = sg.spacing.to_f64_lossy();
    let width = dst_grid.width;
    let mut labels = vec![UNLABELED; dst_grid.len()];
    labels.par_chunks_mut(width).enumerate().for_each(|(row, line)| {
        let y = dst_grid.pixel_center(0, row).1.to_f64_lossy();
        let fy = (oy - y) / s;
        if !(fy >= 0.0 && fy < sh) {
            return;
        }
        let srow = nearest_index(fy, sg.height);
        for (col, slot) in line.iter_mut().enumerate() {
            let x = dst_grid.pixel_center(col, row).0.to_f64_lossy();
            let fx = (x - ox) / s;
            if !(fx >= 0.0 && fx < sw) {
                continue;
            }
            *slot = src.labels[srow * sg.width + nearest_index(fx, sg.width)];
        }
    });
    LabelRaster::new(dst_grid.clone(), labels)
}

/// Index of the nearest cell center for a fractional cell coordinate `f`;
/// a point halfway between two centers maps to the lower index.
#[inline]
fn nearest_index(f: f64, n: usize) -> usize {
    let i = (f - 1.0).ceil();
    (i.max(0.0) as usize).min(n - 1)
}
