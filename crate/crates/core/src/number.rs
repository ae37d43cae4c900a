//! Number domains the model and solver code is generic over.
//!
//! Three instantiations exist: `f64`, [`Rational`] (arbitrary precision) and
//! [`RationalFunction`](crate::parametric::RationalFunction). Model algorithms
//! only require [`Field`]; anything that compares magnitudes (iterative
//! solvers, bound checks) requires [`OrderedField`].

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational numbers.
pub type Rational = BigRational;

/// Row sums of float models may deviate from one by this much.
pub const FLOAT_STOCHASTIC_TOLERANCE: f64 = 1e-10;

pub trait Field:
    Clone
    + Debug
    + Display
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn is_one(&self) -> bool {
        *self == Self::one()
    }
    fn from_rational(value: &Rational) -> Self;
    /// `true` when arithmetic in this domain is free of rounding.
    fn is_exact() -> bool;
    /// Short domain name used in diagnostics.
    fn domain_name() -> &'static str;
    /// Sign relative to zero, when decidable in this domain.
    fn sign(&self) -> Option<Ordering>;
    /// Equality up to the domain's stochasticity tolerance.
    fn stochastic_eq(&self, other: &Self) -> bool {
        self == other
    }
}

pub trait OrderedField: Field + PartialOrd {
    fn total_cmp(&self, other: &Self) -> Ordering;
    fn magnitude(&self) -> Self {
        if self.total_cmp(&Self::zero()) == Ordering::Less {
            -self.clone()
        } else {
            self.clone()
        }
    }
    fn as_f64(&self) -> f64;
    fn min_of(a: Self, b: Self) -> Self {
        if b.total_cmp(&a) == Ordering::Less {
            b
        } else {
            a
        }
    }
    fn max_of(a: Self, b: Self) -> Self {
        if b.total_cmp(&a) == Ordering::Greater {
            b
        } else {
            a
        }
    }
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn from_rational(value: &Rational) -> Self {
        rational_to_f64(value)
    }
    fn is_exact() -> bool {
        false
    }
    fn domain_name() -> &'static str {
        "float"
    }
    fn sign(&self) -> Option<Ordering> {
        self.partial_cmp(&0.0)
    }
    fn stochastic_eq(&self, other: &Self) -> bool {
        (self - other).abs() <= FLOAT_STOCHASTIC_TOLERANCE
    }
}

impl OrderedField for f64 {
    fn total_cmp(&self, other: &Self) -> Ordering {
        f64::total_cmp(self, other)
    }
    fn magnitude(&self) -> Self {
        f64::abs(*self)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Field for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_one(&self) -> bool {
        One::is_one(self)
    }
    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }
    fn is_exact() -> bool {
        true
    }
    fn domain_name() -> &'static str {
        "exact"
    }
    fn sign(&self) -> Option<Ordering> {
        Some(self.cmp(&Zero::zero()))
    }
}

impl OrderedField for Rational {
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
    fn magnitude(&self) -> Self {
        Signed::abs(self)
    }
    fn as_f64(&self) -> f64 {
        rational_to_f64(self)
    }
}

/// Nearest-ish `f64` for a rational, robust against huge numerators and
/// denominators that overflow `f64` individually.
pub fn rational_to_f64(value: &Rational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(value) {
        if v.is_finite() {
            return v;
        }
    }
    let numer = value.numer();
    let denom = value.denom();
    let shift = numer.bits().max(denom.bits()).saturating_sub(1000) as usize;
    let n = (numer >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (denom >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

pub fn rational_from_integer(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Exact rational value of a finite float.
pub fn rational_from_f64(value: f64) -> Option<Rational> {
    Rational::from_float(value)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid number literal `{0}`")]
pub struct ParseNumberError(pub String);

/// Parses `3`, `0.98`, `1e-6`, `2.5E3` or `1/3` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseNumberError> {
    let err = || ParseNumberError(text.to_string());
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_rational(num)?;
        let den = parse_rational(den)?;
        if Zero::is_zero(&den) {
            return Err(err());
        }
        return Ok(num / den);
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = body[pos + 1..].parse().map_err(|_| err())?;
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(&digits).map_err(|_| err())?;
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// `x` as a fraction `p/q`, or an integer when `q = 1`.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Formats a float with six significant digits, trailing zeros trimmed.
pub fn format_f64(value: f64) -> String {
    if value.is_nan() {
        return "nan".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let exponent = value.abs().log10().floor() as i32;
    if !(-5..6).contains(&exponent) {
        let text = format!("{:.5e}", value);
        let (mantissa, exp) = text.split_once('e').expect("scientific format");
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (5 - exponent).max(0) as usize;
    let text = format!("{:.*}", decimals, value);
    trim_zeros(&text).to_string()
}

fn trim_zeros(text: &str) -> &str {
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.')
    } else {
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_rational("0.1").unwrap(), rational(1, 10));
        assert_eq!(parse_rational("0.98").unwrap(), rational(49, 50));
        assert_eq!(parse_rational("1e-6").unwrap(), rational(1, 1_000_000));
        assert_eq!(parse_rational("2.5E3").unwrap(), rational(2500, 1));
        assert_eq!(parse_rational("-3").unwrap(), rational(-3, 1));
        assert_eq!(parse_rational("1/3").unwrap(), rational(1, 3));
        assert_eq!(parse_rational(".5").unwrap(), rational(1, 2));
    }

    #[test]
    fn bad_literals_rejected() {
        for bad in ["", "abc", "1/0", "1.2.3", "e5", "0x10"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn float_formatting_uses_six_significant_digits() {
        assert_eq!(format_f64(1.0 / 6.0), "0.166667");
        assert_eq!(format_f64(11.0 / 3.0), "3.66667");
        assert_eq!(format_f64(0.5), "0.5");
        assert_eq!(format_f64(1.0), "1");
        assert_eq!(format_f64(0.0), "0");
        assert_eq!(format_f64(123456.0), "123456");
        assert_eq!(format_f64(1.5e-7), "1.5e-7");
        assert_eq!(format_f64(9.9999996), "10");
    }

    #[test]
    fn rational_formatting() {
        assert_eq!(format_rational(&rational(1, 6)), "1/6");
        assert_eq!(format_rational(&rational(4, 2)), "2");
        assert_eq!(format_rational(&rational(-1, 3)), "-1/3");
    }

    #[test]
    fn huge_rationals_convert_to_float() {
        let big = num_traits::pow(BigInt::from(10), 400);
        let value = Rational::new(big.clone() + BigInt::from(1), big * BigInt::from(3));
        assert!((rational_to_f64(&value) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn one_tenth_is_not_a_float() {
        // 0.1 has no finite binary expansion
        let exact = parse_rational("0.1").unwrap();
        let through_float = rational_from_f64(0.1).unwrap();
        assert_ne!(exact, through_float);
        let error = rational_to_f64(&(through_float - exact)).abs();
        assert!(error > 0.0 && error < 1e-17);
    }
}
