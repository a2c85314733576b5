//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Real floating-point type the propagators and eigensolver are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted in the documentation are
/// for `f64`; see [`Scalar::tol`] for how they scale down to `f32`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// A tolerance of `x` in double precision, widened to what the scalar type
    /// can actually resolve (at least `1e4` ulps).
    fn tol(x: f64) -> Self {
        Self::lit(x).max(Self::epsilon() * Self::lit(1e4))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn czero<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

pub(crate) fn cone<T: Scalar>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

pub(crate) fn creal<T: Scalar>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}
