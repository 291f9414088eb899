//! GRF rasters: row-major little-endian samples plus a JSON sidecar.
//!
//! `name.grf` holds the samples (4-byte floats for probabilities, 1-byte
//! labels); `name.grf.json` holds the georeference, dtype and NoData value.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::raster::{LabelRaster, ProbabilityRaster, ScalarRaster, UNLABELED};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
}

/// Sidecar metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub crs_tag: String,
    pub origin_x: f64,
    pub origin_y: f64,
    pub spacing: f64,
    pub width: usize,
    pub height: usize,
    pub dtype: Dtype,
    /// `"nan"` for float rasters, `255` for label rasters.
    pub nodata: serde_json::Value,
}

impl Sidecar {
    fn for_grid<T: Scalar>(grid: &GridSpec<T>, dtype: Dtype) -> Self {
        let nodata = match dtype {
            Dtype::F32 => serde_json::Value::String("nan".into()),
            Dtype::U8 => serde_json::Value::from(UNLABELED),
        };
        Sidecar {
            crs_tag: grid.crs_tag.clone(),
            origin_x: grid.origin_x.to_f64_lossy(),
            origin_y: grid.origin_y.to_f64_lossy(),
            spacing: grid.spacing.to_f64_lossy(),
            width: grid.width,
            height: grid.height,
            dtype,
            nodata,
        }
    }

    pub fn grid<T: Scalar>(&self) -> Result<GridSpec<T>> {
        let g = GridSpec {
            crs_tag: self.crs_tag.clone(),
            origin_x: T::from_f64_lossy(self.origin_x),
            origin_y: T::from_f64_lossy(self.origin_y),
            spacing: T::from_f64_lossy(self.spacing),
            width: self.width,
            height: self.height,
        };
        g.validate()?;
        Ok(g)
    }

    fn check_nodata(&self) -> Result<()> {
        let ok = match self.dtype {
            Dtype::F32 => self.nodata.as_str().is_some_and(|s| s.eq_ignore_ascii_case("nan")),
            Dtype::U8 => self.nodata.as_u64() == Some(UNLABELED as u64),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Format(format!("unsupported nodata value {}", self.nodata)))
        }
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("sidecar serializes");
        v.push(b'\n');
        v
    }
}

/// Path of the sidecar belonging to `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Encoded `(samples, sidecar)` for a label raster.
pub fn encode_labels<T: Scalar>(raster: &LabelRaster<T>) -> (Vec<u8>, Vec<u8>) {
    let side = Sidecar::for_grid(&raster.grid, Dtype::U8);
    (raster.labels.clone(), side.to_json_bytes())
}

/// Encoded `(samples, sidecar)` for a scalar raster; samples are narrowed to `f32`.
pub fn encode_scalar<T: Scalar>(raster: &ScalarRaster<T>) -> (Vec<u8>, Vec<u8>) {
    let side = Sidecar::for_grid(&raster.grid, Dtype::F32);
    let mut bin = Vec::with_capacity(raster.values.len() * 4);
    for v in &raster.values {
        let f = if v.is_nodata() { f32::NAN } else { v.to_f64_lossy() as f32 };
        bin.extend_from_slice(&f.to_le_bytes());
    }
    (bin, side.to_json_bytes())
}

pub fn decode_labels<T: Scalar>(bin: &[u8], sidecar: &[u8]) -> Result<LabelRaster<T>> {
    let side: Sidecar = serde_json::from_slice(sidecar)?;
    if side.dtype != Dtype::U8 {
        return Err(Error::Format("expected a u8 label raster".into()));
    }
    side.check_nodata()?;
    let grid = side.grid()?;
    if bin.len() != grid.len() {
        return Err(Error::Format(format!("expected {} bytes of samples, found {}", grid.len(), bin.len())));
    }
    LabelRaster::new(grid, bin.to_vec())
}

pub fn decode_scalar<T: Scalar>(bin: &[u8], sidecar: &[u8]) -> Result<ScalarRaster<T>> {
    let side: Sidecar = serde_json::from_slice(sidecar)?;
    if side.dtype != Dtype::F32 {
        return Err(Error::Format("expected an f32 raster".into()));
    }
    side.check_nodata()?;
    let grid = side.grid()?;
    if bin.len() != grid.len() * 4 {
        return Err(Error::Format(format!("expected {} bytes of samples, found {}", grid.len() * 4, bin.len())));
    }
    let values = bin
        .chunks_exact(4)
        .map(|c| {
            let f = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if f.is_nan() {
                T::nodata()
            } else {
                T::from_f64_lossy(f as f64)
            }
        })
        .collect();
    ScalarRaster::new(grid, values)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_pair(path: &Path, bin: &[u8], side: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bin).map_err(|e| Error::io(path, e))?;
    let sp = sidecar_path(path);
    fs::write(&sp, side).map_err(|e| Error::io(&sp, e))
}

pub fn write_label_raster<T: Scalar>(path: &Path, raster: &LabelRaster<T>) -> Result<()> {
    let (bin, side) = encode_labels(raster);
    write_pair(path, &bin, &side)
}

pub fn read_label_raster<T: Scalar>(path: &Path) -> Result<LabelRaster<T>> {
    decode_labels(&read(path)?, &read(&sidecar_path(path))?)
}

pub fn write_scalar_raster<T: Scalar>(path: &Path, raster: &ScalarRaster<T>) -> Result<()> {
    let (bin, side) = encode_scalar(raster);
    write_pair(path, &bin, &side)
}

pub fn read_scalar_raster<T: Scalar>(path: &Path) -> Result<ScalarRaster<T>> {
    decode_scalar(&read(path)?, &read(&sidecar_path(path))?)
}

pub fn write_probability_raster<T: Scalar>(path: &Path, raster: &ProbabilityRaster<T>) -> Result<()> {
    write_scalar_raster(path, raster.as_raster())
}

pub fn read_probability_raster<T: Scalar>(path: &Path, class_id: usize) -> Result<ProbabilityRaster<T>> {
    ProbabilityRaster::from_raster(class_id, read_scalar_raster(path)?)
}

/// Reads only the sidecar of a raster.
pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    Ok(serde_json::from_slice(&read(&sidecar_path(path))?)?)
}
