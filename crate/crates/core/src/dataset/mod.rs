//! Tiled training datasets and the refine/distill round manifests.
//!
//! A round is a [`TileManifest`] plus one label patch per tile. Patches live
//! in memory as [`LabelRaster`]s until [`write_round`] puts them on disk as
//! `round_<n>/tiles/<tile_id>.grf`; the manifest records the SHA-256 of
//! every patch file so later rounds can prove what they were built from.

mod config;
mod rounds;

pub use config::{
    default_loss_weights, emit_training_config, LrSchedule, TrainEntry, TrainingConfig, TrainingHyperparams,
    SEA_CUCUMBER_LOSS_WEIGHT,
};
pub use rounds::{
    distill_round, latest_round, mock_segment, read_manifest, read_masks, read_round, round_dir, verify_chain,
    write_masks, write_round, ChainSummary,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::grf::encode_labels;
use crate::io::sha256_hex;
use crate::raster::{LabelRaster, UNLABELED};
use crate::scalar::Scalar;

pub const DEFAULT_TILE_SIZE: usize = 512;
pub const MIN_TILE_SIZE: usize = 32;
pub const DEFAULT_MIN_LABELED: f64 = 0.5;
pub const DEFAULT_MAX_REPLICATION: u32 = 10;
pub const DEFAULT_VAL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// Deterministic split from the tile id's hash: the first 8 digest bytes,
/// read as a fraction of 2⁶⁴, below `val_fraction` means validation.
pub fn split_for(tile_id: &str, val_fraction: f64) -> Split {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(tile_id.as_bytes());
    let u = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes")) as f64 / 2f64.powi(64);
    if u < val_fraction {
        Split::Val
    } else {
        Split::Train
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub tile_id: String,
    /// Top-left pixel in the source grid.
    pub col: usize,
    pub row: usize,
    pub size: usize,
    /// Patch path relative to the round directory.
    pub label_patch: String,
    pub labeled_fraction: f64,
    pub class_histogram: Vec<u64>,
    pub unlabeled_pixels: u64,
    pub replication: u32,
    pub split: Split,
}

impl Tile {
    pub fn sidecar_patch(&self) -> String {
        format!("{}.json", self.label_patch)
    }
}

/// Link from round n+1 back to round n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentRef {
    pub manifest_sha256: String,
    /// SHA-256 of each consumed mask file (`pred/<tile_id>.grf` and its
    /// `.grf.json` sidecar), keyed by path relative to the parent round.
    pub masks: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TileManifest<T: Scalar> {
    pub round: u32,
    pub parent: Option<ParentRef>,
    pub catalog: ClassCatalog,
    /// Grid of the label raster the tiles were cut from.
    pub grid: GridSpec<T>,
    pub tile_size: usize,
    pub min_labeled_fraction: f64,
    pub val_fraction: f64,
    pub max_replication: u32,
    /// Rare-class weights the replication counts were derived from.
    pub sampling_weights: Vec<f64>,
    pub class_loss_weights: Vec<f64>,
    /// Sorted by tile id.
    pub tiles: Vec<Tile>,
    /// SHA-256 of every patch file, keyed by path relative to the round directory.
    pub provenance: BTreeMap<String, String>,
}

impl<T: Scalar> TileManifest<T> {
    /// Canonical serialized form: pretty JSON plus a newline.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("manifest serializes");
        v.push(b'\n');
        v
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&self.to_json_bytes())
    }

    /// Labeled pixel counts per class, summed over all tiles.
    pub fn total_histogram(&self) -> Vec<u64> {
        let mut total = vec![0u64; self.catalog.len()];
        for t in &self.tiles {
            for (a, b) in total.iter_mut().zip(&t.class_histogram) {
                *a += b;
            }
        }
        total
    }

    pub fn tile(&self, tile_id: &str) -> Option<&Tile> {
        self.tiles.binary_search_by(|t| t.tile_id.as_str().cmp(tile_id)).ok().map(|i| &self.tiles[i])
    }

    fn seal(&mut self, patches: &BTreeMap<String, LabelRaster<T>>) {
        self.provenance = self
            .tiles
            .par_iter()
            .flat_map_iter(|t| {
                let (bin, side) = encode_labels(&patches[&t.tile_id]);
                [(t.label_patch.clone(), sha256_hex(&bin)), (t.sidecar_patch(), sha256_hex(&side))]
            })
            .collect();
    }
}

/// A manifest together with its in-memory label patches.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRound<T: Scalar> {
    pub manifest: TileManifest<T>,
    pub patches: BTreeMap<String, LabelRaster<T>>,
}

impl<T: Scalar> DatasetRound<T> {
    /// Round 0 as the pipeline builds it: tiles, rare-class weights from the
    /// kept tiles' pooled histogram, then replication.
    pub fn initial(
        labels: &LabelRaster<T>,
        catalog: &ClassCatalog,
        size: usize,
        min_labeled_fraction: f64,
        max_replication: u32,
    ) -> Result<Self> {
        let mut round = extract_tiles(labels, catalog, size, min_labeled_fraction)?;
        let weights = match weights_from_counts(&round.manifest.total_histogram()) {
            Ok(w) => w,
            Err(Error::NoLabeledPixels) => vec![0.0; catalog.len()],
            Err(e) => return Err(e),
        };
        round.manifest = apply_replication(&round.manifest, &weights, max_replication)?;
        Ok(round)
    }
}

pub fn tile_id(col: usize, row: usize) -> String {
    format!("tile_{row:06}_{col:06}")
}

fn make_tile(id: String, col: usize, row: usize, patch: &LabelRaster<impl Scalar>, hist: Vec<u64>) -> Tile {
    let size = patch.width();
    let labeled: u64 = hist.iter().sum();
    let total = (size * size) as u64;
    Tile {
        label_patch: format!("tiles/{id}.grf"),
        split: split_for(&id, DEFAULT_VAL_FRACTION),
        tile_id: id,
        col,
        row,
        size,
        labeled_fraction: labeled as f64 / total as f64,
        class_histogram: hist,
        unlabeled_pixels: total - labeled,
        replication: 1,
    }
}

/// Cuts `labels` into non-overlapping `size`×`size` tiles on a lattice
/// anchored at the raster origin. Edge tiles are padded with unlabeled
/// pixels; tiles whose labeled fraction is below `min_labeled_fraction`
/// are dropped.
pub fn extract_tiles<T: Scalar>(
    labels: &LabelRaster<T>,
    catalog: &ClassCatalog,
    size: usize,
    min_labeled_fraction: f64,
) -> Result<DatasetRound<T>> {
    if size < MIN_TILE_SIZE {
        return Err(Error::TileTooSmall(size));
    }
    if !(0.0..=1.0).contains(&min_labeled_fraction) {
        return Err(Error::BadParameters(format!("min labeled fraction {min_labeled_fraction} outside [0, 1]")));
    }
    labels.validate(catalog)?;
    let (w, h) = (labels.width(), labels.height());
    let positions: Vec<(usize, usize)> =
        (0..h.div_ceil(size)).flat_map(|r| (0..w.div_ceil(size)).map(move |c| (c * size, r * size))).collect();
    let cut: Vec<(Tile, LabelRaster<T>)> = positions
        .par_iter()
        .filter_map(|&(col, row)| {
            let mut patch = vec![UNLABELED; size * size];
            let cols = size.min(w - col);
            for r in 0..size.min(h - row) {
                let src = (row + r) * w + col;
                patch[r * size..r * size + cols].copy_from_slice(&labels.labels[src..src + cols]);
            }
            let mut hist = vec![0u64; catalog.len()];
            for &l in &patch {
                if l != UNLABELED {
                    hist[l as usize] += 1;
                }
            }
            let labeled: u64 = hist.iter().sum();
            if (labeled as f64) < min_labeled_fraction * (size * size) as f64 || labeled == 0 {
                return None;
            }
            let raster = LabelRaster { grid: labels.grid.window(col, row, size), labels: patch };
            Some((make_tile(tile_id(col, row), col, row, &raster, hist), raster))
        })
        .collect();

    let mut tiles = Vec::with_capacity(cut.len());
    let mut patches = BTreeMap::new();
    for (tile, patch) in cut {
        patches.insert(tile.tile_id.clone(), patch);
        tiles.push(tile);
    }
    tiles.sort_by(|a, b| a.tile_id.cmp(&b.tile_id));
    let mut manifest = TileManifest {
        round: 0,
        parent: None,
        catalog: catalog.clone(),
        grid: labels.grid.clone(),
        tile_size: size,
        min_labeled_fraction,
        val_fraction: DEFAULT_VAL_FRACTION,
        max_replication: 1,
        sampling_weights: vec![1.0; catalog.len()],
        class_loss_weights: default_loss_weights(catalog),
        tiles,
        provenance: BTreeMap::new(),
    };
    manifest.seal(&patches);
    Ok(DatasetRound { manifest, patches })
}

/// `w_c = median(nonzero counts) / count_c` for present classes, 0 for absent ones.
pub fn rare_class_weights<T: Scalar>(labels: &LabelRaster<T>, catalog: &ClassCatalog) -> Result<Vec<f64>> {
    weights_from_counts(&labels.class_counts(catalog)?)
}

pub fn weights_from_counts(counts: &[u64]) -> Result<Vec<f64>> {
    let mut present: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
    if present.is_empty() {
        return Err(Error::NoLabeledPixels);
    }
    present.sort_unstable();
    let n = present.len();
    let median =
        if n % 2 == 1 { present[n / 2] as f64 } else { (present[n / 2 - 1] as f64 + present[n / 2] as f64) / 2.0 };
    Ok(counts.iter().map(|&c| if c == 0 { 0.0 } else { median / c as f64 }).collect())
}

/// Sets each tile's replication to `clamp(round(max w_c over classes in the tile), 1, max_rep)`.
pub fn apply_replication<T: Scalar>(
    manifest: &TileManifest<T>,
    weights: &[f64],
    max_rep: u32,
) -> Result<TileManifest<T>> {
    if weights.len() != manifest.catalog.len() {
        return Err(Error::InvalidWeights(format!(
            "expected {} weights, got {}",
            manifest.catalog.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights("weights must be finite and non-negative".into()));
    }
    let max_rep = max_rep.max(1);
    let mut out = manifest.clone();
    for t in &mut out.tiles {
        let w = t.class_histogram.iter().zip(weights).filter(|(&n, _)| n > 0).map(|(_, &w)| w).fold(0.0, f64::max);
        t.replication = (w.round().min(max_rep as f64) as u32).clamp(1, max_rep);
    }
    out.sampling_weights = weights.to_vec();
    out.max_replication = max_rep;
    Ok(out)
}

/// Manual labels win wherever they are set.
pub fn merge_manual_annotations<T: Scalar>(labels: &LabelRaster<T>, manual: &LabelRaster<T>) -> Result<LabelRaster<T>> {
    if labels.grid != manual.grid {
        return Err(Error::GridMismatch);
    }
    let merged =
        labels.labels.par_iter().zip(&manual.labels).map(|(&l, &m)| if m != UNLABELED { m } else { l }).collect();
    LabelRaster::new(labels.grid.clone(), merged)
}
