//! Arithmetic abstraction shared by every solver stage.
//!
//! Two scalar types are supported: [`Rational`] (exact, every comparison is
//! exact) and `f64` (comparisons use a relative tolerance of [`FLOAT_TOL`]).

use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use malachite_base::num::arithmetic::traits::CheckedSqrt;
use malachite_base::num::basic::traits::{One, Zero};
use malachite_base::num::conversion::traits::RoundingFrom;
use malachite_base::rounding_modes::RoundingMode;
pub use malachite_q::Rational;

use crate::error::{Error, Result};

/// Comparison tolerance used by the floating-point scalar.
pub const FLOAT_TOL: f64 = 1e-9;

/// Which arithmetic a computation runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arith {
    Rational,
    Float,
}

impl FromStr for Arith {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rational" | "exact" => Ok(Arith::Rational),
            "float" | "f64" => Ok(Arith::Float),
            other => Err(Error::Parse(format!("unknown arithmetic mode `{other}`"))),
        }
    }
}

impl Display for Arith {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arith::Rational => "rational",
            Arith::Float => "float",
        })
    }
}

/// Ordered field used by the LP engine and the rounding pipeline.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    /// `true` when all arithmetic and comparisons are exact.
    const EXACT: bool;
    const ARITH: Arith;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(v: i64) -> Self;
    fn from_rational(q: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    /// Exact rational value of `self` (for `f64` the binary value).
    fn to_rational(&self) -> Rational;
    /// Square root when representable in this scalar type.
    fn sqrt(&self) -> Option<Self>;

    fn add_ref(&self, other: &Self) -> Self;
    fn sub_ref(&self, other: &Self) -> Self;
    fn mul_ref(&self, other: &Self) -> Self;
    fn div_ref(&self, other: &Self) -> Self;
    /// `self -= a * b`
    fn sub_mul_assign(&mut self, a: &Self, b: &Self);

    /// Absolute tolerance appropriate for comparing `a` and `b`.
    fn tol_for(a: &Self, b: &Self) -> Self;

    fn from_usize(v: usize) -> Self {
        Self::from_int(v as i64)
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn is_zero_tol(&self) -> bool {
        self.eq_tol(&Self::zero())
    }

    fn is_pos(&self) -> bool {
        self.gt_tol(&Self::zero())
    }

    fn is_neg(&self) -> bool {
        self.lt_tol(&Self::zero())
    }

    fn eq_tol(&self, other: &Self) -> bool {
        self.sub_ref(other).abs() <= Self::tol_for(self, other)
    }

    /// `self > other` beyond tolerance.
    fn gt_tol(&self, other: &Self) -> bool {
        *self > other.add_ref(&Self::tol_for(self, other))
    }

    /// `self < other` beyond tolerance.
    fn lt_tol(&self, other: &Self) -> bool {
        self.add_ref(&Self::tol_for(self, other)) < *other
    }

    fn le_tol(&self, other: &Self) -> bool {
        !self.gt_tol(other)
    }

    fn ge_tol(&self, other: &Self) -> bool {
        !self.lt_tol(other)
    }

    fn is_integral_tol(&self) -> bool {
        let r = self.to_f64().round();
        self.eq_tol(&Self::from_int(r as i64))
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn sum<'a, I: IntoIterator<Item = &'a Self>>(items: I) -> Self {
        let mut acc = Self::zero();
        for v in items {
            acc = acc.add_ref(v);
        }
        acc
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    const ARITH: Arith = Arith::Rational;

    fn zero() -> Self {
        Rational::ZERO
    }
    fn one() -> Self {
        Rational::ONE
    }
    fn from_int(v: i64) -> Self {
        Rational::from(v)
    }
    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }
    fn to_f64(&self) -> f64 {
        f64::rounding_from(self, RoundingMode::Nearest).0
    }
    fn to_rational(&self) -> Rational {
        self.clone()
    }
    fn sqrt(&self) -> Option<Self> {
        (&self).checked_sqrt()
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn tol_for(_: &Self, _: &Self) -> Self {
        Rational::ZERO
    }
    fn from_usize(v: usize) -> Self {
        Rational::from(v as u64)
    }
    fn abs(&self) -> Self {
        if *self < Rational::ZERO {
            -self
        } else {
            self.clone()
        }
    }
    fn eq_tol(&self, other: &Self) -> bool {
        self == other
    }
    fn gt_tol(&self, other: &Self) -> bool {
        self > other
    }
    fn lt_tol(&self, other: &Self) -> bool {
        self < other
    }
    fn is_integral_tol(&self) -> bool {
        self.denominator_ref() == &1u32
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const ARITH: Arith = Arith::Float;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn from_rational(q: &Rational) -> Self {
        q.to_f64()
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_rational(&self) -> Rational {
        Rational::try_from(*self).unwrap_or(Rational::ZERO)
    }
    fn sqrt(&self) -> Option<Self> {
        (*self >= 0.0).then(|| f64::sqrt(*self))
    }
    fn add_ref(&self, other: &Self) -> Self {
        self + other
    }
    fn sub_ref(&self, other: &Self) -> Self {
        self - other
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn div_ref(&self, other: &Self) -> Self {
        self / other
    }
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn tol_for(a: &Self, b: &Self) -> Self {
        FLOAT_TOL * 1f64.max(a.abs()).max(b.abs())
    }
}

/// Parses `"p/q"`, an integer, or a decimal such as `"-1.25e3"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("invalid number `{text}`"));
    if s.is_empty() {
        return Err(bad());
    }
    if s.contains('/') {
        return Rational::from_str(s).map_err(|_| bad());
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((a, b)) => (a, b),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numerator = Rational::from_str(if all_digits.is_empty() { "0" } else { &all_digits })
        .map_err(|_| bad())?;
    let shift = exponent - frac_part.len() as i32;
    let ten = Rational::from(10u32);
    let mut scale = Rational::ONE;
    for _ in 0..shift.unsigned_abs() {
        scale *= &ten;
    }
    let mut value = if shift >= 0 {
        numerator * scale
    } else {
        numerator / scale
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/4").unwrap(), Rational::from_signeds(3, 4));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational::from_signeds(-1, 4));
        assert_eq!(parse_rational("12").unwrap(), Rational::from(12));
        assert_eq!(parse_rational("1.5e2").unwrap(), Rational::from(150));
        assert_eq!(parse_rational("25e-2").unwrap(), Rational::from_signeds(1, 4));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn float_tolerance_is_relative() {
        assert!(1e12f64.eq_tol(&(1e12 + 1.0)));
        assert!(!1.0f64.eq_tol(&1.001));
        assert!(0.5f64.lt_tol(&0.6));
        assert!(!0.5f64.lt_tol(&(0.5 + 1e-12)));
    }

    #[test]
    fn rational_sqrt_only_for_squares() {
        assert_eq!(
            Rational::from_signeds(9, 4).sqrt(),
            Some(Rational::from_signeds(3, 2))
        );
        assert_eq!(Rational::from(2).sqrt(), None);
    }

    #[test]
    fn integrality() {
        assert!(Rational::from(3).is_integral_tol());
        assert!(!Rational::from_signeds(1, 2).is_integral_tol());
        assert!((2.0 + 1e-12f64).is_integral_tol());
    }
}
