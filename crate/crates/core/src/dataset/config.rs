//! Configuration handed to the external segmentation trainer.

use serde::{Deserialize, Serialize};

use super::{Split, TileManifest};
use crate::catalog::{ClassCatalog, SEA_CUCUMBER};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Loss weight of the sea cucumber class relative to every other class.
pub const SEA_CUCUMBER_LOSS_WEIGHT: f64 = 7.0;

/// 1.0 per class, except sea cucumbers which get [`SEA_CUCUMBER_LOSS_WEIGHT`].
pub fn default_loss_weights(catalog: &ClassCatalog) -> Vec<f64> {
    catalog.classes().iter().map(|c| if c.name == SEA_CUCUMBER { SEA_CUCUMBER_LOSS_WEIGHT } else { 1.0 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingHyperparams {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub plateau_factor: f64,
    pub plateau_patience: u32,
    /// Overrides the manifest's per-class loss weights.
    pub class_loss_weights: Option<Vec<f64>>,
}

impl Default for TrainingHyperparams {
    fn default() -> Self {
        TrainingHyperparams {
            batch_size: 16,
            learning_rate: 1e-5,
            plateau_factor: 0.1,
            plateau_patience: 5,
            class_loss_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub kind: String,
    pub factor: f64,
    /// Epochs without improvement before decaying.
    pub patience: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainEntry {
    pub tile_id: String,
    pub col: usize,
    pub row: usize,
    pub label_patch: String,
    pub replication: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub loss: String,
    pub classes: Vec<String>,
    pub class_loss_weights: Vec<f64>,
    pub tile_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub manifest: String,
    pub train: Vec<TrainEntry>,
    pub val: Vec<TrainEntry>,
}

pub fn emit_training_config<T: Scalar>(
    manifest: &TileManifest<T>,
    hyper: &TrainingHyperparams,
) -> Result<TrainingConfig> {
    let weights = hyper.class_loss_weights.clone().unwrap_or_else(|| manifest.class_loss_weights.clone());
    if weights.len() != manifest.catalog.len() {
        return Err(Error::InvalidWeights(format!(
            "expected {} class loss weights, got {}",
            manifest.catalog.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidWeights(format!("class loss weight {w} is negative or not finite")));
    }
    if hyper.batch_size == 0
        || !(hyper.learning_rate > 0.0)
        || !(hyper.plateau_factor > 0.0 && hyper.plateau_factor < 1.0)
    {
        return Err(Error::BadParameters(
            "batch size, learning rate and plateau factor must be positive (factor below 1)".into(),
        ));
    }
    let entries = |split| {
        manifest
            .tiles
            .iter()
            .filter(|t| t.split == split)
            .map(|t| TrainEntry {
                tile_id: t.tile_id.clone(),
                col: t.col,
                row: t.row,
                label_patch: t.label_patch.clone(),
                replication: t.replication,
            })
            .collect()
    };
    Ok(TrainingConfig {
        loss: "weighted_dice".into(),
        classes: manifest.catalog.classes().iter().map(|c| c.name.clone()).collect(),
        class_loss_weights: weights,
        tile_size: manifest.tile_size,
        batch_size: hyper.batch_size,
        learning_rate: hyper.learning_rate,
        lr_schedule: LrSchedule {
            kind: "reduce_on_plateau".into(),
            factor: hyper.plateau_factor,
            patience: hyper.plateau_patience,
        },
        manifest: "manifest.json".into(),
        train: entries(Split::Train),
        val: entries(Split::Val),
    })
}
