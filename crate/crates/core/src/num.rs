//! Scalar abstractions shared by the numeric parts of the crate.
//!
//! Models and statistics are written against [`Real`] so they can run in
//! `f32` (training) or `f64` (analysis). Counting metrics only need field
//! arithmetic and are written against [`Field`], which also admits exact
//! rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, Num};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
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
    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Field arithmetic over counts: precision, recall and F1 are ratios of
/// integers, so they can be computed exactly.
pub trait Field: Num + Copy + PartialOrd + Debug {
    fn from_count(n: u64) -> Self {
        // Double-and-add keeps this independent of any cast trait.
        let mut acc = Self::zero();
        let mut power = Self::one();
        let mut rest = n;
        while rest > 0 {
            if rest & 1 == 1 {
                acc = acc + power;
            }
            power = power + power;
            rest >>= 1;
        }
        acc
    }
}

impl<T: Num + Copy + PartialOrd + Debug> Field for T {}

/// Ratio that is zero when the denominator is zero.
pub fn safe_div<T: Field>(num: T, den: T) -> T {
    if den == T::zero() {
        T::zero()
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_count_matches_cast() {
        for n in [0u64, 1, 2, 3, 7, 8, 1023, 123_456] {
            assert_eq!(f64::from_count(n), n as f64);
            assert_eq!(i64::from_count(n), n as i64);
        }
    }

    #[test]
    fn safe_div_zero_denominator() {
        assert_eq!(safe_div(3.0_f64, 0.0), 0.0);
        assert_eq!(safe_div(3.0_f64, 4.0), 0.75);
    }
}
