//! Piecewise-linear interpolation of per-vertex values onto a grid.

use rayon::prelude::*;
use robust::{orient2d, Coord};

use super::delaunay::Triangulation;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::raster::ScalarRaster;
use crate::scalar::Scalar;

/// Barycentric interpolation at every pixel center inside the hull.
///
/// Centers outside the hull are NoData. A center on an edge shared by two
/// triangles takes the value of the lower-numbered triangle, so results do
/// not depend on the thread count.
pub fn interpolate_linear<T: Scalar>(
    tri: &Triangulation<T>,
    values: &[T],
    grid: &GridSpec<T>,
) -> Result<ScalarRaster<T>> {
    if values.len() != tri.vertex_count() {
        return Err(Error::LengthMismatch { expected: tri.vertex_count(), got: values.len() });
    }
    let buckets = RowBuckets::new(tri, grid);
    let width = grid.width;
    let mut out = vec![T::nodata(); grid.len()];
    out.par_chunks_mut(width).enumerate().for_each(|(row, line)| {
        let mut filled = vec![false; width];
        let y = grid.pixel_center(0, row).1.to_f64_lossy();
        for &t in buckets.row(row) {
            let [ia, ib, ic] = tri.triangles()[t as usize];
            let (a, b, c) = (tri.coord(ia), tri.coord(ib), tri.coord(ic));
            let (c0, c1) = col_span(grid, a.x.min(b.x).min(c.x), a.x.max(b.x).max(c.x));
            for col in c0..c1 {
                if filled[col] {
                    continue;
                }
                let p = Coord { x: grid.pixel_center(col, row).0.to_f64_lossy(), y };
                let wa = orient2d(b, c, p);
                let wb = orient2d(c, a, p);
                let wc = orient2d(a, b, p);
                if wa < 0.0 || wb < 0.0 || wc < 0.0 {
                    continue;
                }
                let (va, vb, vc) = (values[ia], values[ib], values[ic]);
                line[col] = blend(wa, wb, wc, va, vb, vc);
                filled[col] = true;
            }
        }
    });
    ScalarRaster::new(grid.clone(), out)
}

/// Convex combination, clamped to the vertex range so rounding cannot overshoot.
#[inline]
fn blend<T: Scalar>(wa: f64, wb: f64, wc: f64, va: T, vb: T, vc: T) -> T {
    let (fa, fb, fc) = (va.to_f64_lossy(), vb.to_f64_lossy(), vc.to_f64_lossy());
    if fa.is_nan() || fb.is_nan() || fc.is_nan() {
        return T::nodata();
    }
    let total = wa + wb + wc;
    let v = (wa * fa + wb * fb + wc * fc) / total;
    let lo = fa.min(fb).min(fc);
    let hi = fa.max(fb).max(fc);
    T::from_f64_lossy(v.clamp(lo, hi))
}

/// Column range whose centers may fall in `[x0, x1]`, padded by one cell.
fn col_span<T: Scalar>(grid: &GridSpec<T>, x0: f64, x1: f64) -> (usize, usize) {
    let ox = grid.origin_x.to_f64_lossy();
    let s = grid.spacing.to_f64_lossy();
    let lo = ((x0 - ox) / s - 0.5).floor() - 1.0;
    let hi = ((x1 - ox) / s - 0.5).ceil() + 1.0;
    clamp_range(lo, hi, grid.width)
}

fn row_span<T: Scalar>(grid: &GridSpec<T>, y0: f64, y1: f64) -> (usize, usize) {
    let oy = grid.origin_y.to_f64_lossy();
    let s = grid.spacing.to_f64_lossy();
    let lo = ((oy - y1) / s - 0.5).floor() - 1.0;
    let hi = ((oy - y0) / s - 0.5).ceil() + 1.0;
    clamp_range(lo, hi, grid.height)
}

fn clamp_range(lo: f64, hi: f64, n: usize) -> (usize, usize) {
    let lo = lo.max(0.0);
    let hi = (hi + 1.0).min(n as f64);
    if !(hi > lo) {
        return (0, 0);
    }
    (lo as usize, hi as usize)
}

/// Triangle indices per grid row, ascending within each row.
struct RowBuckets {
    offsets: Vec<usize>,
    items: Vec<u32>,
}

impl RowBuckets {
    fn new<T: Scalar>(tri: &Triangulation<T>, grid: &GridSpec<T>) -> Self {
        let spans: Vec<(usize, usize)> = tri
            .triangles()
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (tri.coord(a), tri.coord(b), tri.coord(c));
                row_span(grid, a.y.min(b.y).min(c.y), a.y.max(b.y).max(c.y))
            })
            .collect();
        let mut offsets = vec![0usize; grid.height + 1];
        for &(r0, r1) in &spans {
            for r in r0..r1 {
                offsets[r + 1] += 1;
            }
        }
        for r in 0..grid.height {
            offsets[r + 1] += offsets[r];
        }
        let mut cursor = offsets.clone();
        let mut items = vec![0u32; offsets[grid.height]];
        for (t, &(r0, r1)) in spans.iter().enumerate() {
            for r in r0..r1 {
                items[cursor[r]] = t as u32;
                cursor[r] += 1;
            }
        }
        RowBuckets { offsets, items }
    }

    fn row(&self, r: usize) -> &[u32] {
        &self.items[self.offsets[r]..self.offsets[r + 1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rasterize::delaunay::delaunay_triangulate;

    #[test]
    fn centroid_gets_one_third() {
        // pixel center at (1/3, 1/3): grid origin chosen so that col 0 / row 0 is centered there
        let s = 0.01;
        let g: GridSpec<f64> = GridSpec::new(1.0 / 3.0 - s / 2.0, 1.0 / 3.0 + s / 2.0, s, 1, 1).unwrap();
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
        let t = delaunay_triangulate(&pts).unwrap();
        let vals = t.vertex_values(&[0.0, 0.0, 1.0]).unwrap();
        let r = interpolate_linear(&t, &vals, &g).unwrap();
        assert!((r.values[0] - 1.0 / 3.0).abs() < 1e-12, "{}", r.values[0]);
    }

    #[test]
    fn outside_hull_is_nodata() {
        let pts = [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)];
        let t = delaunay_triangulate(&pts).unwrap();
        let g: GridSpec<f64> = GridSpec::new(0.0, 4.0, 1.0, 4, 4).unwrap();
        let r = interpolate_linear(&t, &[1.0, 1.0, 1.0], &g).unwrap();
        // centers with x + y <= 4 are inside; (3.5, 3.5) etc. are not
        for row in 0..4 {
            for col in 0..4 {
                let (x, y) = g.pixel_center(col, row);
                let v = r.get(col, row);
                assert_eq!(!v.is_nan(), x + y <= 4.0, "({col},{row})");
            }
        }
    }

    #[test]
    fn length_mismatch() {
        let t = delaunay_triangulate(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).unwrap();
        let g = GridSpec::new(0.0, 1.0, 0.5, 2, 2).unwrap();
        assert!(matches!(interpolate_linear(&t, &[1.0], &g), Err(Error::LengthMismatch { expected: 3, got: 1 })));
    }

    #[test]
    fn shared_edges_leave_no_gaps() {
        // square split along the diagonal; centers exactly on the diagonal must be covered
        let t = delaunay_triangulate(&[(0.0, 0.0), (8.0, 0.0), (8.0, 8.0), (0.0, 8.0)]).unwrap();
        let g = GridSpec::new(-0.5, 8.5, 1.0, 9, 9).unwrap();
        let r = interpolate_linear(&t, &[1.0; 4], &g).unwrap();
        assert_eq!(r.nodata_count(), 0);
    }
}
