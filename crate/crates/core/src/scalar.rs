//! The numeric abstraction shared by every metric.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real-valued scalar used for seconds, ratios and scores: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`. Non-representable values saturate.
    fn of(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(Self::nan)
    }

    /// Converts a count. Counts in this crate are far below 2^24.
    fn of_count(count: usize) -> Self {
        Self::from_usize(count).unwrap_or_else(Self::max_value)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `num / den`, or zero when `den` is zero.
    fn ratio_or_zero(num: Self, den: Self) -> Self {
        if den == Self::zero() {
            Self::zero()
        } else {
            num / den
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sequential sum in slice order, so reductions do not depend on scheduling.
pub(crate) fn ordered_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

pub(crate) fn mean<T: Scalar>(values: &[T]) -> T {
    T::ratio_or_zero(
        ordered_sum(values.iter().copied()),
        T::of_count(values.len()),
    )
}
