//! Distillation rounds: masks in, next manifest out, and the hash chain
//! linking them on disk.
//!
//! Layout under a dataset root:
//!
//! ```text
//! round_<n>/manifest.json
//! round_<n>/manifest.sha256
//! round_<n>/train_config.json
//! round_<n>/tiles/<tile_id>.grf(.json)
//! round_<n>/pred/<tile_id>.grf(.json)     written by the external model
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{emit_training_config, TrainingHyperparams};
use super::{make_tile, weights_from_counts, DatasetRound, ParentRef, TileManifest};
use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::io::grf::{encode_labels, read_label_raster, write_label_raster};
use crate::io::{hash_file, sha256_hex, write_bytes, write_json};
use crate::raster::{LabelRaster, UNLABELED};
use crate::scalar::Scalar;

/// Builds round n+1 from round n's manifest and one predicted mask per tile.
///
/// Tile geometry is kept exactly; histograms, rare-class weights and
/// replication are recomputed from the new labels.
pub fn distill_round<T: Scalar>(
    manifest: &TileManifest<T>,
    masks: &BTreeMap<String, LabelRaster<T>>,
) -> Result<DatasetRound<T>> {
    if let Some(t) = manifest.tiles.iter().find(|t| !masks.contains_key(&t.tile_id)) {
        return Err(Error::MissingMask(t.tile_id.clone()));
    }
    if let Some(id) = masks.keys().find(|id| manifest.tile(id).is_none()) {
        return Err(Error::ExtraMask(id.clone()));
    }
    let n = manifest.catalog.len();
    let rebuilt: Vec<_> = manifest
        .tiles
        .par_iter()
        .map(|t| {
            let mask = &masks[&t.tile_id];
            if mask.width() != t.size || mask.height() != t.size {
                return Err(Error::SizeMismatch {
                    id: t.tile_id.clone(),
                    expected: t.size,
                    width: mask.width(),
                    height: mask.height(),
                });
            }
            let mut hist = vec![0u64; n];
            for &l in &mask.labels {
                if l == UNLABELED {
                    continue;
                }
                *hist.get_mut(l as usize).ok_or(Error::LabelOutOfCatalog { label: l })? += 1;
            }
            let patch = LabelRaster { grid: manifest.grid.window(t.col, t.row, t.size), labels: mask.labels.clone() };
            let mut tile = make_tile(t.tile_id.clone(), t.col, t.row, &patch, hist);
            tile.split = t.split;
            // hashes of the bytes `write_masks` produces for this mask
            let (bin, side) = encode_labels(mask);
            let hashes = [
                (format!("pred/{}.grf", t.tile_id), sha256_hex(&bin)),
                (format!("pred/{}.grf.json", t.tile_id), sha256_hex(&side)),
            ];
            Ok((tile, patch, hashes))
        })
        .collect::<Result<_>>()?;

    let mut next = manifest.clone();
    next.round = manifest.round + 1;
    next.tiles.clear();
    let mut patches = BTreeMap::new();
    let mut mask_hashes = BTreeMap::new();
    for (tile, patch, hashes) in rebuilt {
        mask_hashes.extend(hashes);
        patches.insert(tile.tile_id.clone(), patch);
        next.tiles.push(tile);
    }
    next.parent = Some(ParentRef { manifest_sha256: manifest.sha256(), masks: mask_hashes });
    let weights = match weights_from_counts(&next.total_histogram()) {
        Ok(w) => w,
        Err(Error::NoLabeledPixels) => vec![0.0; n],
        Err(e) => return Err(e),
    };
    let mut next = super::apply_replication(&next, &weights, manifest.max_replication)?;
    next.seal(&patches);
    Ok(DatasetRound { manifest: next, patches })
}

/// Stand-in for the external student model: each labeled pixel is replaced,
/// with probability `noise_rate`, by a uniformly drawn catalog label.
/// Unlabeled pixels are left alone. Each tile draws from its own stream
/// seeded by `(seed, tile_id)`, so results do not depend on scheduling.
pub fn mock_segment<T: Scalar>(
    truth: &BTreeMap<String, LabelRaster<T>>,
    catalog: &ClassCatalog,
    noise_rate: f64,
    seed: u64,
) -> Result<BTreeMap<String, LabelRaster<T>>> {
    if !(0.0..=1.0).contains(&noise_rate) {
        return Err(Error::BadNoiseRate(noise_rate));
    }
    let n = catalog.len() as u8;
    let items: Vec<(&String, &LabelRaster<T>)> = truth.iter().collect();
    Ok(items
        .into_par_iter()
        .map(|(id, patch)| {
            let mut hasher = Sha256::new();
            hasher.update(seed.to_le_bytes());
            hasher.update(id.as_bytes());
            let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
            let labels = patch
                .labels
                .iter()
                .map(|&l| {
                    if l == UNLABELED || noise_rate == 0.0 || rng.random::<f64>() >= noise_rate {
                        l
                    } else {
                        rng.random_range(0..n)
                    }
                })
                .collect();
            (id.clone(), LabelRaster { grid: patch.grid.clone(), labels })
        })
        .collect())
}

pub fn round_dir(root: &Path, round: u32) -> PathBuf {
    root.join(format!("round_{round}"))
}

/// Highest `n` such that `round_0 ..= round_n` all have a manifest.
pub fn latest_round(root: &Path) -> Option<u32> {
    let mut last = None;
    let mut n = 0;
    while round_dir(root, n).join("manifest.json").is_file() {
        last = Some(n);
        n += 1;
    }
    last
}

/// Writes patches, manifest, manifest digest and trainer config for one round.
pub fn write_round<T: Scalar>(root: &Path, round: &DatasetRound<T>, hyper: &TrainingHyperparams) -> Result<()> {
    let dir = round_dir(root, round.manifest.round);
    let config = emit_training_config(&round.manifest, hyper)?;
    round
        .manifest
        .tiles
        .par_iter()
        .try_for_each(|t| write_label_raster(&dir.join(&t.label_patch), &round.patches[&t.tile_id]))?;
    let bytes = round.manifest.to_json_bytes();
    write_bytes(&dir.join("manifest.json"), &bytes)?;
    write_bytes(&dir.join("manifest.sha256"), format!("{}\n", sha256_hex(&bytes)).as_bytes())?;
    write_json(&dir.join("train_config.json"), &config)
}

pub fn read_manifest<T: Scalar>(root: &Path, round: u32) -> Result<TileManifest<T>> {
    crate::io::read_json(&round_dir(root, round).join("manifest.json"))
}

pub fn read_round<T: Scalar>(root: &Path, round: u32) -> Result<DatasetRound<T>> {
    let manifest: TileManifest<T> = read_manifest(root, round)?;
    let dir = round_dir(root, round);
    let patches = manifest
        .tiles
        .par_iter()
        .map(|t| Ok((t.tile_id.clone(), read_label_raster(&dir.join(&t.label_patch))?)))
        .collect::<Result<_>>()?;
    Ok(DatasetRound { manifest, patches })
}

/// Writes masks as `round_<n>/pred/<tile_id>.grf`.
pub fn write_masks<T: Scalar>(root: &Path, round: u32, masks: &BTreeMap<String, LabelRaster<T>>) -> Result<()> {
    let dir = round_dir(root, round).join("pred");
    let items: Vec<_> = masks.iter().collect();
    items.into_par_iter().try_for_each(|(id, m)| write_label_raster(&dir.join(format!("{id}.grf")), m))
}

/// Every `round_<n>/pred/*.grf`, keyed by file stem.
pub fn read_masks<T: Scalar>(root: &Path, round: u32) -> Result<BTreeMap<String, LabelRaster<T>>> {
    let dir = round_dir(root, round).join("pred");
    let mut paths = Vec::new();
    if dir.is_dir() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.extension().is_some_and(|e| e == "grf") {
                paths.push(path);
            }
        }
    }
    paths
        .par_iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Ok((id, read_label_raster(p)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSummary {
    pub rounds: u32,
    pub files_checked: usize,
}

/// Re-hashes every file referenced by every round and checks each round's
/// parent link. Any changed byte in a manifest, patch or consumed mask fails.
pub fn verify_chain(root: &Path) -> Result<ChainSummary> {
    let last = latest_round(root).ok_or_else(|| Error::ChainBroken(format!("no round_0 under {}", root.display())))?;
    let mut prev_hash: Option<String> = None;
    let mut files_checked = 0;
    for n in 0..=last {
        let dir = round_dir(root, n);
        let rel = |p: &str| format!("round_{n}/{p}");
        let path = dir.join("manifest.json");
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let digest = sha256_hex(&bytes);
        let recorded_path = dir.join("manifest.sha256");
        let recorded = fs::read_to_string(&recorded_path).map_err(|e| Error::io(&recorded_path, e))?;
        if recorded.trim() != digest {
            return Err(Error::HashMismatch { path: rel("manifest.json") });
        }
        let manifest: TileManifest<f64> = serde_json::from_slice(&bytes)?;
        if manifest.round != n {
            return Err(Error::ChainBroken(format!("{} declares round {}", rel("manifest.json"), manifest.round)));
        }
        match (&manifest.parent, &prev_hash) {
            (None, None) => {}
            (Some(p), Some(h)) if &p.manifest_sha256 == h => {
                let parent_dir = round_dir(root, n - 1);
                for (file, want) in &p.masks {
                    if &hash_file(&parent_dir.join(file))? != want {
                        return Err(Error::HashMismatch { path: format!("round_{}/{file}", n - 1) });
                    }
                    files_checked += 1;
                }
            }
            _ => return Err(Error::ChainBroken(format!("round {n} does not link to round {}", n.saturating_sub(1)))),
        }
        for t in &manifest.tiles {
            for p in [&t.label_patch, &t.sidecar_patch()] {
                if !manifest.provenance.contains_key(p.as_str()) {
                    return Err(Error::ChainBroken(format!("{} has no recorded hash", rel(p))));
                }
            }
        }
        for (p, want) in &manifest.provenance {
            if &hash_file(&dir.join(p))? != want {
                return Err(Error::HashMismatch { path: rel(p) });
            }
            files_checked += 1;
        }
        files_checked += 1;
        prev_hash = Some(digest);
    }
    Ok(ChainSummary { rounds: last + 1, files_checked })
}
