//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar the crate can compute with (`f32` or `f64`).
///
/// Everything numeric is written against this trait. File formats are
/// IEEE double precision regardless of `Self`, so conversions go through
/// [`Real::of`] and [`Real::as_f64`].
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Converts an `f64` literal or parameter into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("every f64 converts to a float type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("floats convert to f64")
    }

    /// Machine epsilon of the concrete type.
    #[inline]
    fn eps() -> Self {
        Self::default_epsilon()
    }

    /// Tolerance `base` stated for `f64`, widened by `sqrt(eps / f64::EPSILON)`
    /// for coarser types and never below `10·eps`.
    #[inline]
    fn tol(base: f64) -> Self {
        let widen = (Self::eps().as_f64() / f64::EPSILON).sqrt();
        Self::of(base * widen).max(Self::eps() * Self::of(10.0))
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}
