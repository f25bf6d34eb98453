//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::distributions::uniform::SampleUniform;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar type: `f32` or `f64`.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + FromStr
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable in scalar type")
    }

    /// Converts a count into this type.
    #[inline]
    fn count(value: usize) -> Self {
        Self::from_usize(value).expect("count representable in scalar type")
    }

    /// Widens to `f64` (exact for both `f32` and `f64`).
    #[inline]
    fn wide(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widening_is_exact() {
        let x = 0.1f32;
        assert_eq!(x.wide(), f64::from(x));
        assert_eq!(<f64 as Scalar>::lit(0.25), 0.25);
        assert_eq!(<f32 as Scalar>::count(7), 7.0);
    }
}
