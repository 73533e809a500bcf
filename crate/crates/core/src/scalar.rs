//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for scores, rates and metrics: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumCast
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("f64 is representable in every Scalar")
    }

    /// Exact count-to-scalar conversion (counts stay far below 2^24 in practice).
    fn count(value: u64) -> Self {
        <Self as NumCast>::from(value).expect("count is representable")
    }

    fn as_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("Scalar converts to f64")
    }

    /// Slack for comparisons made after a handful of arithmetic steps.
    fn slack() -> Self {
        Self::epsilon() * Self::of(16.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Ratio `num / den` of two counts, computed in the target precision.
pub fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    T::count(num) / T::count(den)
}
