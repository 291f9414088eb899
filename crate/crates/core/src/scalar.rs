//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating point type usable for coordinates and raster values (`f32` or `f64`).
///
/// Geometric predicates always evaluate in `f64`, so an `f32` scene is
/// triangulated exactly like its widened `f64` copy.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossless for `f32`/`f64` inputs.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Nearest representable value.
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        <Self as NumCast>::from(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_f64_lossy(v as f64)
    }

    /// The NoData marker for scalar rasters.
    #[inline]
    fn nodata() -> Self {
        Self::nan()
    }

    #[inline]
    fn is_nodata(self) -> bool {
        self.is_nan()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
