//! Work-directory stages with content-hash records.
//!
//! Every stage writes into `<workdir>/run/<stage>/` and finishes by writing
//! `stage.json`: the stage parameters, the SHA-256 of each input file and of
//! each output file. A later invocation with the same parameters and
//! unchanged inputs, whose recorded outputs are still intact, is skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use reefmap::io::{hash_file, write_json};

pub const RECORD: &str = "stage.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub params: Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub struct Workspace {
    pub root: PathBuf,
    pub force: bool,
}

impl Workspace {
    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join("run").join(stage)
    }

    pub fn stage_file(&self, stage: &str, file: &str) -> PathBuf {
        self.stage_dir(stage).join(file)
    }

    /// How a path is written into records: relative to the workdir when
    /// inside it, so records do not depend on where the workdir lives.
    pub fn display_path(&self, path: &Path) -> String {
        let canon = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
        let (root, p) = (canon(&self.root), canon(path));
        match p.strip_prefix(&root) {
            Ok(rel) => rel.to_string_lossy().replace('\\', "/"),
            Err(_) => path.to_string_lossy().into_owned(),
        }
    }

    fn hash_inputs(&self, inputs: &[PathBuf]) -> Result<BTreeMap<String, String>> {
        inputs
            .iter()
            .map(|p| {
                Ok((self.display_path(p), hash_file(p).with_context(|| format!("reading input {}", p.display()))?))
            })
            .collect()
    }

    /// Runs `body` in a fresh stage directory unless an intact, matching
    /// record says the outputs are already there. Returns whether it ran.
    pub fn run_stage(
        &self,
        stage: &str,
        params: Value,
        inputs: &[PathBuf],
        body: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<bool> {
        let dir = self.stage_dir(stage);
        let inputs = self.hash_inputs(inputs)?;
        if !self.force && self.is_current(&dir, stage, &params, &inputs) {
            eprintln!("{stage}: up to date");
            return Ok(false);
        }
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        body(&dir)?;
        let outputs = hash_tree(&dir)?;
        let record = StageRecord { stage: stage.to_string(), params, inputs, outputs };
        write_json(&dir.join(RECORD), &record)?;
        eprintln!("{stage}: done ({} files)", record.outputs.len());
        Ok(true)
    }

    fn is_current(&self, dir: &Path, stage: &str, params: &Value, inputs: &BTreeMap<String, String>) -> bool {
        let Ok(record) = reefmap::io::read_json::<StageRecord>(&dir.join(RECORD)) else {
            return false;
        };
        record.stage == stage
            && &record.params == params
            && &record.inputs == inputs
            && record.outputs.iter().all(|(p, h)| hash_file(&dir.join(p)).map(|got| &got == h).unwrap_or(false))
    }
}

/// SHA-256 of every file under `dir` except the record, keyed by relative path.
pub fn hash_tree(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).expect("under dir").to_string_lossy().replace('\\', "/");
            if rel != RECORD {
                out.insert(rel, hash_file(&path)?);
            }
        }
    }
    Ok(out)
}
