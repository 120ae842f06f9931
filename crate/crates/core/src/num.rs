//! Scalar abstraction shared by the scoring and metric code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used for retrieval scores and metrics: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable as float")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `num / den`, with the empty-denominator convention supplied by the caller.
pub(crate) fn ratio<S: Real>(num: usize, den: usize, empty: S) -> S {
    if den == 0 {
        empty
    } else {
        S::from_count(num) / S::from_count(den)
    }
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1<S: Real>(precision: S, recall: S) -> S {
    let denom = precision + recall;
    if denom == S::zero() {
        S::zero()
    } else {
        S::lit(2.0) * precision * recall / denom
    }
}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<S: Real>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    values.iter().copied().sum::<S>() / S::from_count(values.len())
}
