//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point type the tensor algebra is generic over.
///
/// Implemented for `f32` and `f64`. Tensor entries are `Complex<T>`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Smallest tolerance that is meaningful at this precision, scaled from
    /// machine epsilon.
    fn tolerance_floor() -> Self;
}

impl Real for f32 {
    fn tolerance_floor() -> Self {
        1e4 * f32::EPSILON
    }
}

impl Real for f64 {
    fn tolerance_floor() -> Self {
        1e4 * f64::EPSILON
    }
}

/// Complex entry type for a given real type.
pub type C<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a nominal `f64` tolerance to `T`, never going below what the
/// precision of `T` can resolve.
#[inline]
pub fn tol<T: Real>(x: f64) -> T {
    real::<T>(x).max(T::tolerance_floor())
}

#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> C<T> {
    Complex::new(real(re), real(im))
}

#[inline]
pub fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn from_real<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// Casts a complex number between precisions.
#[inline]
pub fn cast_c<A: Real, B: Real>(z: C<A>) -> C<B> {
    Complex::new(
        B::from_f64(z.re.to_f64().unwrap_or(0.0)).unwrap_or_else(B::zero),
        B::from_f64(z.im.to_f64().unwrap_or(0.0)).unwrap_or_else(B::zero),
    )
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
