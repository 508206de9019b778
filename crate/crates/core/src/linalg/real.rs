//! Extended-precision real scalar.
//!
//! [`Real`] wraps an MPFR float. Every operation is correctly rounded, so for a
//! fixed [`Precision`] results are bitwise reproducible. Binary operations on
//! mixed precisions round to the larger of the two.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};

/// Working precision in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Precision(u32);

impl Precision {
    pub const MIN_BITS: u32 = 64;
    pub const DEFAULT_BITS: u32 = 256;

    pub fn new(bits: u32) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(Error::InvalidInput(format!(
                "precision must be at least {} bits, got {bits}",
                Self::MIN_BITS
            )));
        }
        Ok(Precision(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// 2^-bits.
    pub fn epsilon(self) -> Real {
        self.pow2(-(self.0 as i32))
    }

    /// 2^-(bits - slack), the tolerance used by kernel post-conditions.
    pub fn tolerance(self, slack: u32) -> Real {
        self.pow2(-(self.0 as i32 - slack as i32))
    }

    pub fn pow2(self, exp: i32) -> Real {
        let one = Float::with_val(self.0, 1);
        if exp >= 0 {
            Real(one << exp as u32)
        } else {
            Real(one >> (-exp) as u32)
        }
    }

    /// Decimal digits needed for a lossless round trip at this precision.
    pub fn round_trip_digits(self) -> usize {
        (self.0 as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision(Self::DEFAULT_BITS)
    }
}

#[derive(Clone, PartialEq, PartialOrd)]
pub struct Real(Float);

impl Real {
    pub fn zero(prec: Precision) -> Self {
        Real(Float::new(prec.0))
    }

    pub fn one(prec: Precision) -> Self {
        Real(Float::with_val(prec.0, 1))
    }

    pub fn from_f64(x: f64, prec: Precision) -> Self {
        Real(Float::with_val(prec.0, x))
    }

    pub fn from_int(x: i64, prec: Precision) -> Self {
        Real(Float::with_val(prec.0, x))
    }

    pub fn from_ratio(num: i64, den: i64, prec: Precision) -> Self {
        Real::from_int(num, prec) / Real::from_int(den, prec)
    }

    /// Parses a decimal literal, rounding it once to `prec`.
    pub fn parse(s: &str, prec: Precision) -> Result<Self> {
        let parsed = Float::parse(s.trim())
            .map_err(|e| Error::InvalidInput(format!("cannot parse {s:?} as a number: {e}")))?;
        Ok(Real(Float::with_val(prec.0, parsed)))
    }

    pub fn pi(prec: Precision) -> Self {
        Real(Float::with_val(prec.0, Constant::Pi))
    }

    pub fn factorial(n: u32, prec: Precision) -> Self {
        Real(Float::with_val(prec.0, Float::factorial(n)))
    }

    pub fn precision(&self) -> Precision {
        Precision(self.0.prec())
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.cmp0() == Some(Ordering::Greater)
    }

    pub fn is_negative(&self) -> bool {
        self.0.cmp0() == Some(Ordering::Less)
    }

    pub fn abs(&self) -> Real {
        Real(self.0.clone().abs())
    }

    pub fn sqrt(&self) -> Real {
        Real(self.0.clone().sqrt())
    }

    pub fn ln(&self) -> Real {
        Real(self.0.clone().ln())
    }

    pub fn exp(&self) -> Real {
        Real(self.0.clone().exp())
    }

    pub fn cos(&self) -> Real {
        Real(self.0.clone().cos())
    }

    pub fn square(&self) -> Real {
        Real(self.0.clone().square())
    }

    pub fn recip(&self) -> Real {
        Real(self.0.clone().recip())
    }

    pub fn powi(&self, n: i32) -> Real {
        Real(Float::with_val(self.0.prec(), (&self.0).pow(n)))
    }

    pub fn max(self, other: Real) -> Real {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Real) -> Real {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Total order on finite values; NaN sorts last.
    pub fn total_cmp(&self, other: &Real) -> Ordering {
        self.0.total_cmp(&other.0)
    }

    /// Round-trippable decimal text at this value's precision.
    pub fn to_decimal(&self) -> String {
        let digits = self.precision().round_trip_digits();
        if self.0.is_zero() {
            return "0".to_string();
        }
        self.0.to_string_radix(10, Some(digits))
    }

    /// Decimal text with `digits` significant digits.
    pub fn to_decimal_digits(&self, digits: usize) -> String {
        if self.0.is_zero() {
            return "0".to_string();
        }
        self.0.to_string_radix(10, Some(digits))
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal_digits(20))
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident) => {
        impl $trait<&Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                let prec = self.0.prec().max(rhs.0.prec());
                Real(Float::with_val(prec, $trait::$method(&self.0, &rhs.0)))
            }
        }
        impl $trait<Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                $trait::$method(self, &rhs)
            }
        }
        impl $trait<&Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                $trait::$method(&self, rhs)
            }
        }
        impl $trait<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                $trait::$method(&self, &rhs)
            }
        }
        impl $trait<f64> for &Real {
            type Output = Real;
            fn $method(self, rhs: f64) -> Real {
                Real(Float::with_val(self.0.prec(), $trait::$method(&self.0, rhs)))
            }
        }
        impl $trait<f64> for Real {
            type Output = Real;
            fn $method(self, rhs: f64) -> Real {
                $trait::$method(&self, rhs)
            }
        }
        impl $assign_trait<&Real> for Real {
            fn $assign_method(&mut self, rhs: &Real) {
                *self = $trait::$method(&*self, rhs);
            }
        }
        impl $assign_trait<Real> for Real {
            fn $assign_method(&mut self, rhs: Real) {
                *self = $trait::$method(&*self, &rhs);
            }
        }
        impl $assign_trait<f64> for Real {
            fn $assign_method(&mut self, rhs: f64) {
                *self = $trait::$method(&*self, rhs);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign);
binop!(Sub, sub, SubAssign, sub_assign);
binop!(Mul, mul, MulAssign, mul_assign);
binop!(Div, div, DivAssign, div_assign);

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(-self.0)
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(-self.0.clone())
    }
}

impl PartialEq<f64> for Real {
    fn eq(&self, other: &f64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<f64> for Real {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

/// Sums left to right; an empty iterator cannot know its precision, so use
/// [`sum_with`] when the sequence may be empty.
impl<'a> Sum<&'a Real> for Real {
    fn sum<I: Iterator<Item = &'a Real>>(iter: I) -> Real {
        let mut iter = iter;
        let first = iter.next().expect("Real::sum over an empty iterator").clone();
        iter.fold(first, |acc, x| acc + x)
    }
}

/// Left-to-right sum starting from zero at `prec`.
pub fn sum_with<I>(prec: Precision, iter: I) -> Real
where
    I: IntoIterator<Item = Real>,
{
    iter.into_iter().fold(Real::zero(prec), |acc, x| acc + x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_floor() {
        assert!(Precision::new(63).is_err());
        assert_eq!(Precision::new(64).unwrap().bits(), 64);
        assert_eq!(Precision::default().bits(), 256);
    }

    #[test]
    fn round_trip_digits_are_lossless() {
        let prec = Precision::default();
        let x = Real::from_int(2, prec).sqrt() / Real::from_int(3, prec);
        let back = Real::parse(&x.to_decimal(), prec).unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn mixed_precision_rounds_to_larger() {
        let a = Real::one(Precision::new(64).unwrap());
        let b = Real::one(Precision::new(128).unwrap());
        assert_eq!((&a + &b).precision().bits(), 128);
    }

    #[test]
    fn factorial_and_powers() {
        let prec = Precision::default();
        assert_eq!(Real::factorial(5, prec), 120.0);
        assert_eq!(Real::from_int(3, prec).powi(-2) * 9.0, 1.0);
        assert_eq!(prec.pow2(-3), 0.125);
    }
}
