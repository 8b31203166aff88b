//! Scalar traits shared by the generic tensor algebra.

use std::fmt::Debug;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, Num};

/// Real floating point type: `f32` or `f64`.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Default + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Component type of a tensor: a real float or a complex number over one.
pub trait Component:
    Copy + Num + std::ops::Neg<Output = Self> + Debug + Send + Sync + 'static
{
    type Real: Real;

    fn from_real(r: Self::Real) -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> Self::Real;
}

macro_rules! real_component {
    ($t:ty) => {
        impl Component for $t {
            type Real = $t;

            #[inline]
            fn from_real(r: $t) -> $t {
                r
            }

            #[inline]
            fn conj(self) -> $t {
                self
            }

            #[inline]
            fn modulus(self) -> $t {
                self.abs()
            }
        }
    };
}

real_component!(f32);
real_component!(f64);

impl<T: Real> Component for Complex<T> {
    type Real = T;

    #[inline]
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }

    #[inline]
    fn conj(self) -> Self {
        Complex::conj(&self)
    }

    #[inline]
    fn modulus(self) -> T {
        self.norm()
    }
}

/// Shorthand for literal constants in generic code.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}
