//! Scalar abstraction for all real-valued math in this crate.
//!
//! Everything numeric is generic over [`Scalar`] so the same code runs in
//! f32 or f64. The crate root exports f64 aliases, which is what the CLI
//! and the benchmarks use; f32 exists mainly to keep the code honest about
//! precision assumptions.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the crate.
///
/// Random draws are always made in f64 and then converted, so f32 and f64
/// instantiations consume identical RNG streams.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + core::ops::AddAssign
    + core::ops::SubAssign
    + core::ops::MulAssign
    + core::ops::DivAssign
    + core::fmt::Debug
    + core::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an f64 constant into the working scalar type.
///
/// Panics only if the target type cannot represent any finite f64, which
/// cannot happen for the provided impls.
#[inline]
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must convert to scalar type")
}

/// Converts the working scalar into f64, e.g. for serialization.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar must convert to f64")
}
