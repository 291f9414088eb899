//! Pipeline configuration: one optional JSON file, overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use reefmap::ClassCatalog;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub workdir: Option<PathBuf>,
    /// `default5`, `default6`, or a path to a catalog JSON file.
    pub catalog: Option<String>,
    /// Point-CSV consumed by `ingest` when `--input` is not given.
    pub points: Option<PathBuf>,
    pub grid_spacing: Option<f64>,
    pub percentiles: Option<(f64, f64)>,
    pub epsilon: Option<f64>,
    pub tile_size: Option<usize>,
    pub min_labeled: Option<f64>,
    pub max_replication: Option<u32>,
    pub connectivity: Option<u8>,
    pub min_pixels: Option<usize>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Ok(reefmap::io::read_json(p).with_context(|| format!("loading config {}", p.display()))?),
            None => Ok(Self::default()),
        }
    }
}

pub fn load_catalog(spec: Option<&str>) -> Result<ClassCatalog> {
    match spec.unwrap_or("default5") {
        "default5" => Ok(ClassCatalog::default_five()),
        "default6" => Ok(ClassCatalog::default_six()),
        path => Ok(reefmap::io::read_json(Path::new(path)).with_context(|| format!("loading catalog {path}"))?),
    }
}

/// Parses `a,b` into a pair of floats.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated numbers, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("0.01,0.99").unwrap(), (0.01, 0.99));
        assert_eq!(parse_pair(" -21.1 , 55.2").unwrap(), (-21.1, 55.2));
        assert!(parse_pair("0.5").is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok: PipelineConfig = serde_json::from_str(r#"{"tile_size": 256, "percentiles": [0.02, 0.98]}"#).unwrap();
        assert_eq!(ok.tile_size, Some(256));
        assert_eq!(ok.percentiles, Some((0.02, 0.98)));
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"tile_sise": 256}"#).is_err());
    }
}
