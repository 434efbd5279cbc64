//! Floating-point width abstraction.
//!
//! Every sampler in this crate is generic over [`Scalar`] so that a whole run
//! can execute in genuine single precision (`f32`) or double precision
//! (`f64`). The width is chosen once per experiment; see
//! [`PrecisionMode`](crate::parallel::PrecisionMode) for the runtime switch.

use std::fmt;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Conversion from `f64`, saturating to the nearer infinity when the
    /// value does not fit (only relevant for `f32`).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(|| {
            if v < 0.0 {
                Self::neg_infinity()
            } else {
                Self::infinity()
            }
        })
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Two, spelled once.
    fn two() -> Self {
        Self::one() + Self::one()
    }

    /// Half, spelled once.
    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossy_conversions_saturate() {
        assert_eq!(<f32 as Scalar>::from_f64_lossy(1e300), f32::INFINITY);
        assert_eq!(<f32 as Scalar>::from_f64_lossy(-1e300), f32::NEG_INFINITY);
        assert_eq!(<f64 as Scalar>::from_f64_lossy(1.5), 1.5);
    }
}
