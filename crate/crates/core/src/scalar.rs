//! Floating-point scalar abstraction used by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the solvers, trees, and statistics are generic over.
///
/// `f32` and `f64` both implement it; the pipeline layer instantiates
/// everything with [`crate::Value`].
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from a sample count or index, exact for the counts the
    /// pipeline sees.
    fn from_count(n: usize) -> Self {
        Self::from_count_checked(n).expect("count representable in scalar type")
    }

    fn from_count_checked(n: usize) -> Option<Self> {
        <Self as FromPrimitive>::from_usize(n)
    }

    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("scalar representable as f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
