//! Scalar abstraction for the real-valued side of the crate.
//!
//! Fixed-point registers are integer bit patterns; everything that reasons
//! about exact real values (primitive functions, dual numbers, the classical
//! oracle) is generic over [`Real`] so it runs at `f32` or `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
