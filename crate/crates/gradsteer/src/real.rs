//! Scalar abstraction: all numerical code is generic over [`Real`], with
//! `f64` used for gradient checks and reports and `f32` available for
//! lighter training runs.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` (panics only on out-of-range,
    /// which cannot happen for the finite constants used here).
    fn from_f64c(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
