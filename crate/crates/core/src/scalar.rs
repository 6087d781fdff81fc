//! Scalar abstraction shared by the numeric modules.
//!
//! Everything that is pure floating-point math is written against [`Scalar`],
//! so the decoders run in `f32` as well as `f64`. The certification routines
//! that go through an LP solver, and the experiment harness, work in `f64`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// A real floating-point type usable by the decoders.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into this type.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn nan() -> Self {
        Self::lit(f64::NAN)
    }

    /// Machine epsilon of the type.
    fn eps() -> Self;
}

impl Scalar for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Scalar for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Shorthand for `T::lit`.
#[inline]
pub(crate) fn c<T: Scalar>(v: f64) -> T {
    T::lit(v)
}
