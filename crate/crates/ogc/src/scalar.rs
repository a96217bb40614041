//! Scalar abstraction for the numeric core.
//!
//! All of the control and projection math is written against [`Real`], a
//! blanket trait over `num-traits` floating-point types. Concrete aliases
//! for `f64` (the default used by the CLI) and `f32` live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the library.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

/// Converts an `f64` literal into the working scalar type.
///
/// Panics only if the target type cannot represent finite `f64` values,
/// which none of the supported scalars do.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("scalar type must represent f64 literals")
}

#[inline]
pub fn two<T: Real>() -> T {
    T::one() + T::one()
}

#[inline]
pub fn half<T: Real>() -> T {
    T::one() / two()
}
