//! Coarse segmentation labels from georeferenced point predictions.
//!
//! Pipeline stages:
//!
//! 1. **ingest** – parse point-level class probabilities and survey geometry.
//! 2. **rasterize** – Delaunay triangulation and barycentric interpolation onto a grid.
//! 3. **annotate** – per-class quantile normalization, argmax labeling, nearest-neighbour alignment.
//! 4. **dataset** – tiling, rare-class replication, trainer configuration, distillation rounds.
//! 5. **metrics** / **analytics** – evaluation and ecological statistics of label rasters.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod analytics;
pub mod annotate;
pub mod catalog;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod ingest;
pub mod io;
pub mod metrics;
pub mod raster;
pub mod rasterize;
pub mod scalar;
pub mod synth;

pub use catalog::{ClassCatalog, ClassEntry};
pub use error::{Error, ErrorKind, Result};
pub use grid::{grid_from_extent, world_to_pixel, GridSpec};
pub use raster::{LabelRaster, ProbabilityRaster, ScalarRaster, UNLABELED};
pub use scalar::Scalar;

pub type Grid = GridSpec<f64>;
pub type Labels = LabelRaster<f64>;
pub type Probabilities = ProbabilityRaster<f64>;
pub type Field = ScalarRaster<f64>;
pub type Points = ingest::PointPredictionSet<f64>;
pub type Mesh = rasterize::Triangulation<f64>;
