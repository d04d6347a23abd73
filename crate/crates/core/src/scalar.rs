//! Scalar abstractions.
//!
//! The centering and summation kernels only need field arithmetic, so they are
//! written against [`Field`] and run unchanged on `f32`, `f64` and exact
//! rationals. Anything that takes square roots or fractional powers needs
//! [`Real`], which is implemented for the two IEEE float types.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Field arithmetic plus the few extras the statistics kernels need.
pub trait Field:
    NumAssign + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static
{
    /// Relative tolerance below which a negative squared statistic is treated
    /// as roundoff and clamped to zero.
    fn clamp_tolerance() -> Self;

    /// `false` for NaN and the infinities; always `true` for exact types.
    fn is_finite_value(self) -> bool;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

/// Floating-point scalars.
pub trait Real: Field + Float + ToPrimitive {
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

macro_rules! impl_float_field {
    ($($t:ty => $tol:expr),*) => {
        $(
            impl Field for $t {
                #[inline]
                fn clamp_tolerance() -> Self {
                    $tol
                }

                #[inline]
                fn is_finite_value(self) -> bool {
                    self.is_finite()
                }
            }

            impl Real for $t {}
        )*
    };
}

impl_float_field!(f32 => 1e-5, f64 => 1e-12);

macro_rules! impl_ratio_field {
    ($($t:ty),*) => {
        $(
            impl Field for Ratio<$t> {
                #[inline]
                fn clamp_tolerance() -> Self {
                    Ratio::from_integer(0)
                }

                #[inline]
                fn is_finite_value(self) -> bool {
                    true
                }
            }
        )*
    };
}

impl_ratio_field!(i64, i128);
