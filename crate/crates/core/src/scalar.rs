//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Tolerance used for unit-norm and orthogonality checks. Never finer
    /// than a few ulps of the type.
    fn geometric_tol() -> Self {
        let eps = Self::epsilon() * Self::from_f64(64.0).unwrap();
        eps.max(Self::from_f64(1e-12).unwrap())
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Lossy conversion from an `f64` literal or sample.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 representable in target scalar")
}

/// `π²/2`, the largest value the half-squared geodesic cost can take.
#[inline]
pub fn half_pi_sq<T: Real>() -> T {
    let pi = T::PI();
    pi * pi / lit(2.0)
}
