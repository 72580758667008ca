//! Numeric abstraction for feature values.
//!
//! Everything that touches feature cells (datasets, perturbations, trees,
//! hashing) is generic over [`Scalar`]. Accuracies, percentages and timings
//! are always `f64`.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A floating-point feature value.
///
/// `Display` must render the shortest decimal string that round-trips to the
/// same value and never use exponent notation; both `f32` and `f64` satisfy
/// this, and point serialization for hashing relies on it.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Display
    + Debug
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Canonical decimal rendering used when hashing data points.
    ///
    /// Integral values print without a decimal point and negative zero prints
    /// as `0`.
    fn canonical(self) -> String {
        if self.is_zero() {
            "0".to_string()
        } else {
            self.to_string()
        }
    }

    /// Midpoint of `lo < hi` that is guaranteed to satisfy `lo <= mid < hi`.
    fn midpoint(lo: Self, hi: Self) -> Self {
        let two = Self::one() + Self::one();
        let mid = lo / two + hi / two;
        if mid >= hi || mid < lo {
            lo
        } else {
            mid
        }
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
