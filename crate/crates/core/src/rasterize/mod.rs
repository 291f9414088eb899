//! Scattered points to grids: triangulation, linear interpolation and
//! merging of overlapping survey sessions.

pub mod delaunay;
pub mod interpolate;

pub use delaunay::{delaunay_triangulate, Triangulation};
pub use interpolate::interpolate_linear;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::ingest::{PointPrediction, PointPredictionSet};
use crate::raster::{ProbabilityRaster, ScalarRaster};
use crate::scalar::Scalar;

/// Triangulates `points` and interpolates the matching per-point `values`.
pub fn interpolate_points<T: Scalar>(points: &[(T, T)], values: &[T], grid: &GridSpec<T>) -> Result<ScalarRaster<T>> {
    if values.len() != points.len() {
        return Err(Error::LengthMismatch { expected: points.len(), got: values.len() });
    }
    let tri = delaunay_triangulate(points)?;
    let vertex_values = tri.vertex_values(values)?;
    interpolate_linear(&tri, &vertex_values, grid)
}

/// One probability raster per class for a single session, sharing one triangulation.
pub fn rasterize_session<T: Scalar>(
    session: &[PointPrediction<T>],
    n_classes: usize,
    grid: &GridSpec<T>,
) -> Result<Vec<ProbabilityRaster<T>>> {
    let points: Vec<(T, T)> = session.iter().map(|p| (p.x, p.y)).collect();
    let tri = delaunay_triangulate(&points)?;
    (0..n_classes)
        .into_par_iter()
        .map(|c| {
            let per_point: Vec<T> = session.iter().map(|p| p.probs[c]).collect();
            let values = tri.vertex_values(&per_point)?;
            ProbabilityRaster::from_raster(c, interpolate_linear(&tri, &values, grid)?)
        })
        .collect()
}

/// Per-pixel mean of the non-NoData inputs; NoData where every input is NoData.
///
/// Values are summed in sorted order, so the result does not depend on the
/// order of `rasters`.
pub fn merge_session_rasters<T: Scalar>(rasters: &[ProbabilityRaster<T>]) -> Result<ProbabilityRaster<T>> {
    let first = rasters.first().ok_or(Error::EmptyList)?;
    for r in &rasters[1..] {
        if r.grid() != first.grid() {
            return Err(Error::GridMismatch);
        }
        if r.class_id != first.class_id {
            return Err(Error::ClassMismatch { expected: first.class_id, got: r.class_id });
        }
    }
    let grid = first.grid().clone();
    let width = grid.width;
    let mut out = vec![T::nodata(); grid.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(row, line)| {
        let mut buf: Vec<f64> = Vec::with_capacity(rasters.len());
        for (col, slot) in line.iter_mut().enumerate() {
            let i = row * width + col;
            buf.clear();
            buf.extend(rasters.iter().map(|r| r.values()[i]).filter(|v| !v.is_nodata()).map(|v| v.to_f64_lossy()));
            if buf.is_empty() {
                continue;
            }
            buf.sort_by(f64::total_cmp);
            let mean = buf.iter().sum::<f64>() / buf.len() as f64;
            *slot = T::from_f64_lossy(mean.clamp(0.0, 1.0));
        }
    });
    ProbabilityRaster::new(grid, first.class_id, out)
}

/// Per class, every session rasterized and merged: one raster per catalog class.
pub fn rasterize_set<T: Scalar>(set: &PointPredictionSet<T>, grid: &GridSpec<T>) -> Result<Vec<ProbabilityRaster<T>>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = set.catalog.len();
    let per_session = set.sessions.values().map(|s| rasterize_session(s, n, grid)).collect::<Result<Vec<_>>>()?;
    (0..n)
        .into_par_iter()
        .map(|c| {
            let layers: Vec<ProbabilityRaster<T>> = per_session.iter().map(|s| s[c].clone()).collect();
            merge_session_rasters(&layers)
        })
        .collect()
}
