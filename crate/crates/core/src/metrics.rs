//! Segmentation evaluation: confusion counts, pixel accuracy, IoU.
//!
//! Counts are exact integers accumulated per row block and summed, so any
//! partitioning of the work gives identical results. Truth pixels that are
//! unlabeled are skipped; labeled truth pixels predicted as unlabeled land
//! in a separate spill column instead of widening the matrix.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::raster::{LabelRaster, UNLABELED};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub catalog: ClassCatalog,
    /// Row-major `N × N`; rows are true classes, columns predicted classes.
    pub counts: Vec<u64>,
    /// Per true class, pixels predicted as unlabeled.
    pub unpredicted: Vec<u64>,
    /// Sum of `counts`.
    pub evaluated_pixels: u64,
}

impl ConfusionCounts {
    pub fn zeros(catalog: &ClassCatalog) -> Self {
        let n = catalog.len();
        ConfusionCounts {
            catalog: catalog.clone(),
            counts: vec![0; n * n],
            unpredicted: vec![0; n],
            evaluated_pixels: 0,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.unpredicted.len()
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n_classes() + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        let n = self.n_classes();
        &self.counts[truth * n..(truth + 1) * n]
    }

    /// Adds another matrix over the same catalog (pooling zones).
    pub fn accumulate(&mut self, other: &ConfusionCounts) -> Result<()> {
        if self.catalog != other.catalog {
            return Err(Error::BadParameters("cannot pool matrices over different catalogs".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.unpredicted.iter_mut().zip(&other.unpredicted) {
            *a += b;
        }
        self.evaluated_pixels += other.evaluated_pixels;
        Ok(())
    }

    pub fn unpredicted_pixels(&self) -> u64 {
        self.unpredicted.iter().sum()
    }
}

/// Tallies `(truth, pred)` pixel pairs.
pub fn confusion_matrix<T: Scalar>(
    truth: &LabelRaster<T>,
    pred: &LabelRaster<T>,
    catalog: &ClassCatalog,
) -> Result<ConfusionCounts> {
    if truth.grid != pred.grid {
        return Err(Error::GridMismatch);
    }
    let n = catalog.len();
    let width = truth.grid.width.max(1);
    // Vec layout: n*n confusion cells, then n spill cells.
    let tally = truth
        .labels
        .par_chunks(width)
        .zip(pred.labels.par_chunks(width))
        .try_fold(
            || vec![0u64; n * n + n],
            |mut acc, (t_row, p_row)| {
                for (&t, &p) in t_row.iter().zip(p_row) {
                    if t == UNLABELED {
                        if p != UNLABELED && p as usize >= n {
                            return Err(Error::LabelOutOfCatalog { label: p });
                        }
                        continue;
                    }
                    if t as usize >= n {
                        return Err(Error::LabelOutOfCatalog { label: t });
                    }
                    if p == UNLABELED {
                        acc[n * n + t as usize] += 1;
                    } else if (p as usize) < n {
                        acc[t as usize * n + p as usize] += 1;
                    } else {
                        return Err(Error::LabelOutOfCatalog { label: p });
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n * n + n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let counts = tally[..n * n].to_vec();
    let unpredicted = tally[n * n..].to_vec();
    let evaluated_pixels = counts.iter().sum();
    Ok(ConfusionCounts { catalog: catalog.clone(), counts, unpredicted, evaluated_pixels })
}

/// Row-stochastic form of a confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedConfusion {
    pub rows: Vec<Vec<f64>>,
    /// False for classes with no truth pixels; their rows stay zero.
    pub present: Vec<bool>,
}

pub fn normalize_confusion(counts: &ConfusionCounts) -> NormalizedConfusion {
    let n = counts.n_classes();
    let mut rows = Vec::with_capacity(n);
    let mut present = Vec::with_capacity(n);
    for t in 0..n {
        let row = counts.row(t);
        let sum: u64 = row.iter().sum();
        present.push(sum > 0);
        rows.push(if sum == 0 { vec![0.0; n] } else { row.iter().map(|&c| c as f64 / sum as f64).collect() });
    }
    NormalizedConfusion { rows, present }
}

/// Trace over evaluated pixels.
pub fn pixel_accuracy(counts: &ConfusionCounts) -> Result<f64> {
    if counts.evaluated_pixels == 0 {
        return Err(Error::NoEvaluatedPixels);
    }
    let trace: u64 = (0..counts.n_classes()).map(|c| counts.get(c, c)).sum();
    Ok(trace as f64 / counts.evaluated_pixels as f64)
}

/// `TP / (TP + FP + FN)` per class; `None` where the denominator is zero.
pub fn iou_per_class(counts: &ConfusionCounts) -> Vec<Option<f64>> {
    let n = counts.n_classes();
    (0..n)
        .map(|c| {
            let tp = counts.get(c, c);
            let fn_: u64 = counts.row(c).iter().sum::<u64>() - tp;
            let fp: u64 = (0..n).map(|t| counts.get(t, c)).sum::<u64>() - tp;
            let denom = tp + fp + fn_;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect()
}

/// Arithmetic mean over present classes only.
pub fn mean_iou(ious: &[Option<f64>]) -> Result<f64> {
    let present: Vec<f64> = ious.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::NoPresentClasses);
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class_id: usize,
    pub name: String,
    /// Absent when the class appears in neither truth nor prediction.
    pub iou: Option<f64>,
    /// Diagonal of the normalized confusion matrix.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub zone: String,
    pub accuracy: f64,
    pub mean_iou: f64,
    pub classes: Vec<ClassScore>,
    pub confusion: NormalizedConfusion,
    pub evaluated_pixels: u64,
    pub unpredicted_pixels: u64,
}

impl EvalReport {
    pub fn from_counts(zone: impl Into<String>, counts: &ConfusionCounts) -> Result<Self> {
        let accuracy = pixel_accuracy(counts)?;
        let ious = iou_per_class(counts);
        let mean_iou = mean_iou(&ious)?;
        let confusion = normalize_confusion(counts);
        let classes = counts
            .catalog
            .classes()
            .iter()
            .zip(&ious)
            .map(|(c, &iou)| {
                let i = c.index as usize;
                ClassScore {
                    class_id: i,
                    name: c.name.clone(),
                    iou,
                    recall: confusion.present[i].then(|| confusion.rows[i][i]),
                }
            })
            .collect();
        Ok(EvalReport {
            zone: zone.into(),
            accuracy,
            mean_iou,
            classes,
            confusion,
            evaluated_pixels: counts.evaluated_pixels,
            unpredicted_pixels: counts.unpredicted_pixels(),
        })
    }
}

/// Per-zone reports plus a total computed from pooled pixel counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneReports {
    pub zones: Vec<EvalReport>,
    pub total: EvalReport,
    pub total_method: String,
}

pub fn evaluate<T: Scalar>(
    zone: &str,
    truth: &LabelRaster<T>,
    pred: &LabelRaster<T>,
    catalog: &ClassCatalog,
) -> Result<EvalReport> {
    EvalReport::from_counts(zone, &confusion_matrix(truth, pred, catalog)?)
}

/// Evaluates each zone, then pools every zone's pixels for the total row.
pub fn evaluate_zones(zones: &[(String, ConfusionCounts)]) -> Result<ZoneReports> {
    let (_, first) = zones.first().ok_or(Error::EmptyList)?;
    let mut pooled = ConfusionCounts::zeros(&first.catalog);
    let mut reports = Vec::with_capacity(zones.len());
    for (name, counts) in zones {
        pooled.accumulate(counts)?;
        reports.push(EvalReport::from_counts(name.clone(), counts)?);
    }
    Ok(ZoneReports {
        zones: reports,
        total: EvalReport::from_counts("Total", &pooled)?,
        total_method: "pooled pixel counts across zones (averaging per-zone metrics would differ)".into(),
    })
}

/// Plain-text table: one row per report with accuracy, mean IoU and per-class IoU.
/// Absent classes print as `/`.
pub fn format_table(reports: &[&EvalReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let mut out = String::new();
    let _ = write!(out, "{:<16} {:>9} {:>9}", "Zone", "Accuracy", "Mean IoU");
    for c in &first.classes {
        let _ = write!(out, " {:>12}", abbreviate(&c.name));
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<16} {:>9.4} {:>9.4}", r.zone, r.accuracy, r.mean_iou);
        for c in &r.classes {
            match c.iou {
                Some(v) => {
                    let _ = write!(out, " {:>12.4}", v);
                }
                None => {
                    let _ = write!(out, " {:>12}", "/");
                }
            }
        }
        out.push('\n');
    }
    out
}

fn abbreviate(name: &str) -> String {
    if name.len() <= 12 {
        name.to_string()
    } else {
        let mut s: String = name.chars().take(11).collect();
        s.push('.');
        s
    }
}

/// Normalized confusion matrix as CSV, rows = true class.
pub fn confusion_csv(report: &EvalReport) -> String {
    let mut out = String::from("true\\pred");
    for c in &report.classes {
        out.push(',');
        out.push_str(&c.name);
    }
    out.push('\n');
    for (c, row) in report.classes.iter().zip(&report.confusion.rows) {
        out.push_str(&c.name);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
