//! Seeded synthetic survey scenes for end-to-end checks without field data.
//!
//! Ground truth is a Voronoi partition whose sites are at least
//! `20 × point_step` apart, so every cell contains a disc of radius
//! `10 × point_step`. A single survey session runs a serpentine
//! (boustrophedon) path across the extent and drops a point every
//! `point_step` meters of travel; each point's probabilities are the one-hot
//! vector of the true class plus clipped Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::grid::{grid_from_extent, GridSpec};
use crate::ingest::{PointPrediction, PointPredictionSet};
use crate::raster::LabelRaster;
use crate::scalar::Scalar;

pub const SESSION_ID: &str = "synth";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    /// Side of the square scene, meters.
    pub extent: f64,
    pub transect_spacing: f64,
    pub point_step: f64,
    /// Standard deviation of the probability perturbation.
    pub noise: f64,
    /// Ground-truth cell size; defaults to `point_step`.
    pub truth_spacing: Option<f64>,
}

impl SynthParams {
    pub fn new(seed: u64, extent: f64, transect_spacing: f64, point_step: f64, noise: f64) -> Self {
        SynthParams { seed, extent, transect_spacing, point_step, noise, truth_spacing: None }
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.extent, self.transect_spacing, self.point_step, self.truth_spacing.unwrap_or(1.0)];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::BadParameters("extent and spacings must be positive".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::BadParameters(format!("noise sigma {} must be >= 0", self.noise)));
        }
        if self.point_step >= self.extent || self.transect_spacing >= self.extent {
            return Err(Error::BadParameters("spacings must be smaller than the extent".into()));
        }
        if (self.extent / self.point_step) * (self.extent / self.transect_spacing) > 5e7 {
            return Err(Error::BadParameters("scene would exceed 5·10⁷ survey points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub x: f64,
    pub y: f64,
    pub class_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene<T: Scalar> {
    pub params: SynthParams,
    pub sites: Vec<Site>,
    pub ground_truth: LabelRaster<T>,
    pub survey_points: PointPredictionSet<T>,
}

impl<T: Scalar> SyntheticScene<T> {
    /// True class at a location (nearest site, lower index on ties).
    pub fn class_at(&self, x: f64, y: f64) -> usize {
        nearest_site(&self.sites, x, y).class_id
    }
}

fn nearest_site(sites: &[Site], x: f64, y: f64) -> &Site {
    let mut best = &sites[0];
    let mut best_d = f64::INFINITY;
    for s in sites {
        let d = (s.x - x).powi(2) + (s.y - y).powi(2);
        if d < best_d {
            best = s;
            best_d = d;
        }
    }
    best
}

pub fn synth_scene<T: Scalar>(params: &SynthParams, catalog: &ClassCatalog) -> Result<SyntheticScene<T>> {
    params.validate()?;
    if catalog.is_empty() {
        return Err(Error::BadParameters("catalog has no classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let e = params.extent;
    let sites = voronoi_sites(&mut rng, e, 20.0 * params.point_step, catalog.len());

    let cell = params.truth_spacing.unwrap_or(params.point_step);
    let grid: GridSpec<T> =
        grid_from_extent(T::zero(), T::zero(), T::from_f64_lossy(e), T::from_f64_lossy(e), T::from_f64_lossy(cell))?;
    let mut labels = Vec::with_capacity(grid.len());
    for row in 0..grid.height {
        for col in 0..grid.width {
            let (x, y) = grid.pixel_center(col, row);
            labels.push(nearest_site(&sites, x.to_f64_lossy(), y.to_f64_lossy()).class_id as u8);
        }
    }
    let ground_truth = LabelRaster::new(grid, labels)?;

    let normal = Normal::new(0.0, params.noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let jitter = 0.05 * params.point_step;
    let mut points = Vec::new();
    for (seq, (x, y)) in serpentine(e, params.transect_spacing, params.point_step).into_iter().enumerate() {
        let x = (x + rng.random_range(-jitter..=jitter)).clamp(0.0, e);
        let y = (y + rng.random_range(-jitter..=jitter)).clamp(0.0, e);
        let truth = nearest_site(&sites, x, y).class_id;
        let probs = (0..catalog.len())
            .map(|c| {
                let base = if c == truth { 1.0 } else { 0.0 };
                let v = if params.noise > 0.0 { base + normal.sample(&mut rng) } else { base };
                T::from_f64_lossy(v.clamp(0.0, 1.0))
            })
            .collect();
        points.push(PointPrediction {
            session_id: SESSION_ID.into(),
            seq: seq as u64,
            x: T::from_f64_lossy(x),
            y: T::from_f64_lossy(y),
            probs,
        });
    }
    let survey_points = PointPredictionSet::from_points(catalog.clone(), points)?;
    Ok(SyntheticScene { params: params.clone(), sites, ground_truth, survey_points })
}

/// Dart throwing with a fixed attempt budget; always yields at least one site.
fn voronoi_sites(rng: &mut ChaCha8Rng, extent: f64, min_sep: f64, n_classes: usize) -> Vec<Site> {
    let target = ((extent / min_sep).powi(2) * 2.0).ceil().max(1.0) as usize;
    let mut sites: Vec<Site> = Vec::new();
    for _ in 0..target * 30 {
        if sites.len() >= target {
            break;
        }
        let x = rng.random_range(0.0..extent);
        let y = rng.random_range(0.0..extent);
        if sites.iter().all(|s| (s.x - x).hypot(s.y - y) >= min_sep) {
            sites.push(Site { x, y, class_id: rng.random_range(0..n_classes) });
        }
    }
    if sites.is_empty() {
        sites.push(Site { x: extent / 2.0, y: extent / 2.0, class_id: rng.random_range(0..n_classes) });
    }
    sites
}

/// Points every `step` meters of travel along a boustrophedon path with
/// horizontal legs `spacing` apart, inset half a step from the edges.
fn serpentine(extent: f64, spacing: f64, step: f64) -> Vec<(f64, f64)> {
    let inset = step / 2.0;
    let (x0, x1) = (inset, extent - inset);
    let mut vertices = Vec::new();
    let mut y = inset.min(spacing / 2.0);
    let mut leftward = false;
    while y <= extent - inset {
        let (a, b) = if leftward { (x1, x0) } else { (x0, x1) };
        vertices.push((a, y));
        vertices.push((b, y));
        leftward = !leftward;
        y += spacing;
    }
    let mut out = vec![vertices[0]];
    let mut carry = 0.0; // distance already travelled since the last point
    for w in vertices.windows(2) {
        let ((ax, ay), (bx, by)) = (w[0], w[1]);
        let len = (bx - ax).hypot(by - ay);
        let mut t = step - carry;
        while t <= len + 1e-12 {
            let f = t / len;
            out.push((ax + (bx - ax) * f, ay + (by - ay) * f));
            t += step;
        }
        carry = len - (t - step);
    }
    out
}
