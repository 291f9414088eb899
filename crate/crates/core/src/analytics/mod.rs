//! Ecological statistics from label rasters: habitat cover, individual
//! instances (count, size, longest axis), densities and point-level
//! relative abundance.

mod components;
mod hull;

pub use components::Connectivity;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::ingest::PointPredictionSet;
use crate::raster::LabelRaster;
use crate::scalar::Scalar;

pub const DEFAULT_MIN_PIXELS: usize = 4;
pub const DEFAULT_PRESENCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCover {
    pub class_id: usize,
    pub name: String,
    /// `#rrggbb`, for pie charts.
    pub color: String,
    pub pixels: u64,
    /// Share of labeled pixels, in `[0, 1]`.
    pub fraction: f64,
    pub area_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverStats {
    pub labeled_pixels: u64,
    pub labeled_area_m2: f64,
    pub classes: Vec<ClassCover>,
}

/// Habitat composition over labeled pixels.
pub fn class_cover<T: Scalar>(labels: &LabelRaster<T>, catalog: &ClassCatalog) -> Result<CoverStats> {
    let counts = labels.class_counts(catalog)?;
    let labeled: u64 = counts.iter().sum();
    if labeled == 0 {
        return Err(Error::NoLabeledPixels);
    }
    let cell = labels.grid.cell_area().to_f64_lossy();
    let classes = catalog
        .classes()
        .iter()
        .zip(&counts)
        .map(|(c, &n)| ClassCover {
            class_id: c.index as usize,
            name: c.name.clone(),
            color: format!("#{:02x}{:02x}{:02x}", c.color[0], c.color[1], c.color[2]),
            pixels: n,
            fraction: n as f64 / labeled as f64,
            area_m2: n as f64 * cell,
        })
        .collect();
    Ok(CoverStats { labeled_pixels: labeled, labeled_area_m2: labeled as f64 * cell, classes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub class_id: usize,
    /// `(col, row)` in raster order.
    #[serde(skip)]
    pub pixels: Vec<(u32, u32)>,
    pub pixel_count: usize,
    pub area_m2: f64,
    pub length_m: f64,
    pub centroid_x: f64,
    pub centroid_y: f64,
}

/// Maximal connected components of `class_id`, dropping those smaller than
/// `min_pixels`, ordered by first pixel in raster order.
pub fn connected_components<T: Scalar>(
    labels: &LabelRaster<T>,
    catalog: &ClassCatalog,
    class_id: usize,
    connectivity: Connectivity,
    min_pixels: usize,
) -> Result<Vec<InstanceRecord>> {
    catalog.check_class(class_id)?;
    let grid = &labels.grid;
    let s = grid.spacing.to_f64_lossy();
    let ox = grid.origin_x.to_f64_lossy();
    let oy = grid.origin_y.to_f64_lossy();
    components::component_pixels(labels, class_id as u8, connectivity)
        .into_par_iter()
        .filter(|p| p.len() >= min_pixels.max(1))
        .map(|pixels| {
            let n = pixels.len() as f64;
            let (sc, sr) = pixels.iter().fold((0u64, 0u64), |(a, b), &(c, r)| (a + c as u64, b + r as u64));
            let length_m = longest_axis(&pixels, s)?;
            Ok(InstanceRecord {
                class_id,
                pixel_count: pixels.len(),
                area_m2: n * s * s,
                length_m,
                centroid_x: ox + (sc as f64 / n + 0.5) * s,
                centroid_y: oy - (sr as f64 / n + 0.5) * s,
                pixels,
            })
        })
        .collect()
}

/// Longest axis of an instance in meters: the largest distance between two
/// pixel centers plus one pixel width.
pub fn instance_length(instance: &InstanceRecord, spacing: f64) -> Result<f64> {
    longest_axis(&instance.pixels, spacing)
}

pub fn longest_axis(pixels: &[(u32, u32)], spacing: f64) -> Result<f64> {
    if pixels.is_empty() {
        return Err(Error::EmptyInstance);
    }
    Ok((hull::diameter2(pixels) as f64).sqrt() * spacing + spacing)
}

/// Instances per square meter.
pub fn density(count: usize, surveyed_area_m2: f64) -> Result<f64> {
    if !(surveyed_area_m2 > 0.0) || !surveyed_area_m2.is_finite() {
        return Err(Error::NonPositiveArea(surveyed_area_m2));
    }
    Ok(count as f64 / surveyed_area_m2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub count: usize,
    pub mean_m: f64,
    /// Standard error of the mean: sample SD / √n, 0 for a single value.
    pub se_m: f64,
}

impl LengthSummary {
    /// e.g. `19.6 ± 0.24 cm`
    pub fn format_cm(&self) -> String {
        format!("{:.1} ± {:.2} cm", self.mean_m * 100.0, self.se_m * 100.0)
    }
}

pub fn length_summary(lengths: &[f64]) -> Result<LengthSummary> {
    if lengths.is_empty() {
        return Err(Error::EmptyList);
    }
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let se = if lengths.len() < 2 {
        0.0
    } else {
        let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(LengthSummary { count: lengths.len(), mean_m: mean, se_m: se })
}

/// Per class, the fraction of points whose probability reaches `threshold`.
/// Classes are scored independently, so frequencies need not sum to 1.
pub fn relative_abundance<T: Scalar>(set: &PointPredictionSet<T>, threshold: f64) -> Result<Vec<f64>> {
    let total = set.len();
    if total == 0 {
        return Err(Error::EmptySet);
    }
    let mut hits = vec![0usize; set.catalog.len()];
    for p in set.iter() {
        for (h, v) in hits.iter_mut().zip(&p.probs) {
            if v.to_f64_lossy() >= threshold {
                *h += 1;
            }
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / total as f64).collect())
}

/// `class,centroid_x,centroid_y,area_m2,length_m`
pub fn instances_csv(instances: &[InstanceRecord], catalog: &ClassCatalog) -> String {
    let mut out = String::from("class,centroid_x,centroid_y,area_m2,length_m\n");
    for i in instances {
        let name = catalog.name(i.class_id).unwrap_or("?");
        let _ = writeln!(out, "{name},{},{},{},{}", i.centroid_x, i.centroid_y, i.area_m2, i.length_m);
    }
    out
}

/// GeoJSON `FeatureCollection` of instance centroids.
pub fn instances_geojson(instances: &[InstanceRecord], catalog: &ClassCatalog, crs_tag: &str) -> serde_json::Value {
    let features: Vec<serde_json::Value> = instances
        .iter()
        .map(|i| {
            serde_json::json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [i.centroid_x, i.centroid_y] },
                "properties": {
                    "class": catalog.name(i.class_id).unwrap_or("?"),
                    "class_id": i.class_id,
                    "area_m2": i.area_m2,
                    "length_m": i.length_m,
                    "pixels": i.pixel_count,
                }
            })
        })
        .collect();
    serde_json::json!({
        "type": "FeatureCollection",
        "crs_tag": crs_tag,
        "features": features,
    })
}
