//! Field abstraction shared by the floating-point and exact-rational code paths.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Which arithmetic a computation ran under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarKind {
    ExactRational,
    Float64,
}

/// Ordered field operations needed by the symmetric-function machinery.
///
/// `f64` compares against zero with a scale-relative tolerance, `BigRational`
/// compares exactly.
pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    const KIND: ScalarKind;

    fn from_i64(v: i64) -> Self;

    fn abs_val(&self) -> Self;

    fn is_finite_val(&self) -> bool;

    fn to_f64(&self) -> f64;

    /// Relative tolerance used for sign decisions; zero for exact arithmetic.
    fn sign_tolerance() -> f64;

    /// `self > 0`, where values within `sign_tolerance() * scale` of zero count as zero.
    fn is_positive_rel(&self, scale: &Self) -> bool;

    /// `self >= 0` up to the same tolerance band.
    fn is_nonnegative_rel(&self, scale: &Self) -> bool;

    /// `|self - other| <= tol * scale`; exact equality under rationals.
    fn approx_eq_rel(&self, other: &Self, tol: f64, scale: &Self) -> bool;

    fn is_exact() -> bool {
        Self::KIND == ScalarKind::ExactRational
    }

    fn from_usize(v: usize) -> Self {
        Self::from_i64(v as i64)
    }
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Float64;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn is_finite_val(&self) -> bool {
        self.is_finite()
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn sign_tolerance() -> f64 {
        1e-14
    }

    fn is_positive_rel(&self, scale: &Self) -> bool {
        *self > Self::sign_tolerance() * scale.abs()
    }

    fn is_nonnegative_rel(&self, scale: &Self) -> bool {
        *self >= -Self::sign_tolerance() * scale.abs()
    }

    fn approx_eq_rel(&self, other: &Self, tol: f64, scale: &Self) -> bool {
        (self - other).abs() <= tol * scale.abs()
    }
}

impl Scalar for BigRational {
    const KIND: ScalarKind = ScalarKind::ExactRational;

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }

    fn is_finite_val(&self) -> bool {
        true
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn sign_tolerance() -> f64 {
        0.0
    }

    fn is_positive_rel(&self, _scale: &Self) -> bool {
        self.is_positive()
    }

    fn is_nonnegative_rel(&self, _scale: &Self) -> bool {
        !self.is_negative()
    }

    fn approx_eq_rel(&self, other: &Self, _tol: f64, _scale: &Self) -> bool {
        self == other
    }
}

/// Builds `p/q` as an exact rational.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"3"`, `"-7/4"` or a terminating decimal such as `"1.25"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(BigRational::new(num, den));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = int.starts_with('-');
        let int_part: BigInt = match int.trim_start_matches(['-', '+']) {
            "" => BigInt::zero(),
            s => s.parse().ok()?,
        };
        let frac_part: BigInt = frac.parse().ok()?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let mut value = BigRational::new(int_part * &den + frac_part, den);
        if negative {
            value = -value;
        }
        return Some(value);
    }
    text.parse::<BigInt>().ok().map(BigRational::from_integer)
}

/// Renders a rational as `p/q`, or `p` when the denominator is one.
pub fn format_rational(value: &BigRational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3"), Some(ratio(3, 1)));
        assert_eq!(parse_rational("-7/4"), Some(ratio(-7, 4)));
        assert_eq!(parse_rational("1.25"), Some(ratio(5, 4)));
        assert_eq!(parse_rational("-0.5"), Some(ratio(-1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn formats_reduced_fractions() {
        assert_eq!(format_rational(&ratio(18, 22)), "9/11");
        assert_eq!(format_rational(&ratio(4, 2)), "2");
    }

    #[test]
    fn float_tolerance_band() {
        assert!(!1e-20f64.is_positive_rel(&1.0));
        assert!(1e-10f64.is_positive_rel(&1.0));
        assert!((-1e-20f64).is_nonnegative_rel(&1.0));
        assert!(ratio(1, 1_000_000_000).is_positive_rel(&ratio(1, 1)));
    }
}
