//! Floating point scalar abstraction for the sparse linear algebra layer.

use std::fmt::{Debug, Display};

/// Real scalar usable by [`crate::linsolve`]: `f32` or `f64`.
///
/// Method names collide between `num_traits::Float` and faer's field traits,
/// so generic code calls them through the trait path (`Float::abs(x)`).
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + faer::traits::RealField
    + Copy
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion used for tolerances and diagnostics.
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
