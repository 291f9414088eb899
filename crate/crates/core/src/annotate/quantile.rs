use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{pool_class_values, PointPredictionSet};
use crate::scalar::Scalar;

pub const DEFAULT_P_LOW: f64 = 0.01;
pub const DEFAULT_P_HIGH: f64 = 0.99;
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Low and high empirical percentiles of one class's pooled probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QuantileStats<T: Scalar> {
    pub class_id: usize,
    pub q_low: T,
    pub q_high: T,
    pub sample_count: usize,
}

/// Everything needed to replay the normalization of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormalizationParams<T: Scalar> {
    pub p_low: f64,
    pub p_high: f64,
    pub epsilon: T,
    /// One entry per catalog class, in class order.
    pub classes: Vec<QuantileStats<T>>,
}

impl<T: Scalar> NormalizationParams<T> {
    /// Percentiles of every class, pooled over all sessions of `set`.
    pub fn from_points(set: &PointPredictionSet<T>, p_low: f64, p_high: f64, epsilon: T) -> Result<Self> {
        check_epsilon(epsilon)?;
        let classes = (0..set.catalog.len())
            .into_par_iter()
            .map(|c| quantile_stats(&pool_class_values(set, c)?, c, p_low, p_high))
            .collect::<Result<Vec<_>>>()?;
        Ok(NormalizationParams { p_low, p_high, epsilon, classes })
    }

    pub fn stats(&self, class_id: usize) -> Result<&QuantileStats<T>> {
        self.classes.iter().find(|s| s.class_id == class_id).ok_or(Error::UnknownClass(class_id))
    }
}

pub(crate) fn check_epsilon<T: Scalar>(epsilon: T) -> Result<()> {
    if epsilon > T::zero() && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveEpsilon(epsilon.to_f64_lossy()))
    }
}

/// Percentiles by linear interpolation between the order statistics
/// bracketing rank `(n - 1) · p`.
pub fn quantile_stats<T: Scalar>(values: &[T], class_id: usize, p_low: f64, p_high: f64) -> Result<QuantileStats<T>> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    if !(0.0 <= p_low && p_low < p_high && p_high <= 1.0) {
        return Err(Error::BadPercentilePair { low: p_low, high: p_high });
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::BadParameters("percentile input contains NaN".into()));
    }
    let mut work = values.to_vec();
    let q_low = percentile_in_place(&mut work, p_low);
    let q_high = percentile_in_place(&mut work, p_high);
    Ok(QuantileStats { class_id, q_low, q_high, sample_count: values.len() })
}

/// `values` is reordered; its contents are unchanged.
fn percentile_in_place<T: Scalar>(values: &mut [T], p: f64) -> T {
    let n = values.len();
    let h = (n - 1) as f64 * p;
    let lo = (h.floor() as usize).min(n - 1);
    let frac = T::from_f64_lossy(h - lo as f64);
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("NaN filtered");
    let (_, lo_val, rest) = values.select_nth_unstable_by(lo, cmp);
    let lo_val = *lo_val;
    if lo + 1 >= n || frac == T::zero() {
        return lo_val;
    }
    // the next order statistic is the minimum of the upper partition
    let hi_val = rest.iter().copied().fold(T::infinity(), |m, v| if v < m { v } else { m });
    lo_val + (hi_val - lo_val) * frac
}
