//! Scalar abstraction shared by the geometry and network code.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::num::ParseFloatError;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// `Display` must print the shortest representation that parses back to the
/// same bits, which the standard library guarantees for both primitive floats.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + FromStr<Err = ParseFloatError>
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, rounding to nearest.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
