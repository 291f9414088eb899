//! Coarse annotations: per-class quantile normalization, argmax labeling,
//! and nearest-neighbour alignment onto a finer grid.

mod quantile;
mod upsample;

pub use quantile::{
    quantile_stats, NormalizationParams, QuantileStats, DEFAULT_EPSILON, DEFAULT_P_HIGH, DEFAULT_P_LOW,
};
pub use upsample::upsample_nearest;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::ingest::PointPredictionSet;
use crate::raster::{LabelRaster, ProbabilityRaster, UNLABELED};
use crate::rasterize::rasterize_set;
use crate::scalar::Scalar;

/// `clip((p − q_low) / (q_high − q_low + ε), 0, 1)` per pixel; NoData passes through.
pub fn normalize_raster<T: Scalar>(
    raster: &ProbabilityRaster<T>,
    stats: &QuantileStats<T>,
    epsilon: T,
) -> Result<ProbabilityRaster<T>> {
    if raster.class_id != stats.class_id {
        return Err(Error::ClassMismatch { expected: stats.class_id, got: raster.class_id });
    }
    quantile::check_epsilon(epsilon)?;
    let denom = stats.q_high - stats.q_low + epsilon;
    let values = raster
        .values()
        .par_iter()
        .map(|&p| if p.is_nodata() { p } else { ((p - stats.q_low) / denom).max(T::zero()).min(T::one()) })
        .collect();
    ProbabilityRaster::new(raster.grid().clone(), raster.class_id, values)
}

/// Per pixel, the smallest class index attaining the maximum normalized value
/// among non-NoData classes; [`UNLABELED`] where every class is NoData.
///
/// `normalized` must hold exactly one raster for each class `0..n_classes`,
/// in any order.
pub fn argmax_label<T: Scalar>(normalized: &[ProbabilityRaster<T>], n_classes: usize) -> Result<LabelRaster<T>> {
    let mut by_class: Vec<Option<&ProbabilityRaster<T>>> = vec![None; n_classes];
    for r in normalized {
        match by_class.get_mut(r.class_id) {
            Some(slot @ None) => *slot = Some(r),
            Some(Some(_)) => return Err(Error::BadParameters(format!("duplicate raster for class {}", r.class_id))),
            None => return Err(Error::UnknownClass(r.class_id)),
        }
    }
    let rasters: Vec<&ProbabilityRaster<T>> =
        by_class.iter().enumerate().map(|(c, r)| r.ok_or(Error::MissingClassRaster(c))).collect::<Result<_>>()?;
    let first = *rasters.first().ok_or(Error::MissingClassRaster(0))?;
    if rasters.iter().any(|r| r.grid() != first.grid()) {
        return Err(Error::GridMismatch);
    }
    let labels = (0..first.grid().len())
        .into_par_iter()
        .map(|i| {
            let mut best = UNLABELED;
            let mut best_v = T::zero();
            for (c, r) in rasters.iter().enumerate() {
                let v = r.values()[i];
                if v.is_nodata() {
                    continue;
                }
                if best == UNLABELED || v > best_v {
                    best = c as u8;
                    best_v = v;
                }
            }
            best
        })
        .collect();
    LabelRaster::new(first.grid().clone(), labels)
}

/// Fraction of pixels carrying the unlabeled sentinel.
pub fn unlabeled_fraction<T: Scalar>(labels: &LabelRaster<T>) -> f64 {
    if labels.labels.is_empty() {
        return 0.0;
    }
    (labels.labels.len() - labels.labeled_count()) as f64 / labels.labels.len() as f64
}

/// Points to coarse labels in one go: per-session rasterization and merge,
/// pooled-point percentiles, normalization, argmax.
pub fn coarse_labels<T: Scalar>(
    set: &PointPredictionSet<T>,
    grid: &GridSpec<T>,
    p_low: f64,
    p_high: f64,
    epsilon: T,
) -> Result<(LabelRaster<T>, NormalizationParams<T>)> {
    let params = NormalizationParams::from_points(set, p_low, p_high, epsilon)?;
    let merged = rasterize_set(set, grid)?;
    let normalized = merged
        .par_iter()
        .map(|r| normalize_raster(r, params.stats(r.class_id)?, epsilon))
        .collect::<Result<Vec<_>>>()?;
    Ok((argmax_label(&normalized, set.catalog.len())?, params))
}
