//! Numeric semantics for process values.
//!
//! Every update rule is written once against the [`Scalar`] trait and
//! instantiated in two modes: exact rationals for oracle and property
//! tests, and binary64 for large runs. Contraction equalities (such as
//! the exact 1/3 rate of the two-process rule) are only testable in the
//! rational mode; the float mode carries a fixed absolute tolerance on
//! every inequality check instead.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::Error;

/// Absolute tolerance applied to inequality checks in float mode.
pub const FLOAT_TOL: f64 = 1e-12;

/// A totally ordered field element in [0,1] (by usage, not by type).
pub trait Scalar:
    Clone
    + Ord
    + Eq
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Zero
    + One
    + 'static
{
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn to_f64(&self) -> f64;

    /// Largest multiple of 1/q that is <= self.
    fn quantize_down(&self, q: u64) -> Self;
    /// Smallest multiple of 1/q that is >= self.
    fn quantize_up(&self, q: u64) -> Self;
    /// Whether self is an exact integer multiple of 1/q.
    fn on_grid(&self, q: u64) -> bool;

    /// Slack added to inequality checks: zero in exact mode, a small
    /// absolute constant in float mode.
    fn slack() -> Self;

    /// `a <= b` up to the mode's slack.
    fn le_approx(a: &Self, b: &Self) -> bool {
        *a <= b.clone() + Self::slack()
    }

    /// Rendering for trace files: exact fraction or 17-significant-digit
    /// decimal.
    fn render(&self) -> String;
}

/// Exact-rational realization.
pub type Rational = BigRational;

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn quantize_down(&self, q: u64) -> Self {
        let scaled = self * BigRational::from_integer(BigInt::from(q));
        BigRational::new(scaled.floor().to_integer(), BigInt::from(q))
    }

    fn quantize_up(&self, q: u64) -> Self {
        let scaled = self * BigRational::from_integer(BigInt::from(q));
        BigRational::new(scaled.ceil().to_integer(), BigInt::from(q))
    }

    fn on_grid(&self, q: u64) -> bool {
        (self * BigRational::from_integer(BigInt::from(q))).is_integer()
    }

    fn slack() -> Self {
        Zero::zero()
    }

    fn render(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }
}

/// Binary64 realization. The wrapper exists to get a total order
/// (`total_cmp`) so float values can live in ordered sets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F64(pub f64);

impl Eq for F64 {}

impl PartialOrd for F64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for F64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add for F64 {
    type Output = F64;
    fn add(self, rhs: F64) -> F64 {
        F64(self.0 + rhs.0)
    }
}

impl Sub for F64 {
    type Output = F64;
    fn sub(self, rhs: F64) -> F64 {
        F64(self.0 - rhs.0)
    }
}

impl Mul for F64 {
    type Output = F64;
    fn mul(self, rhs: F64) -> F64 {
        F64(self.0 * rhs.0)
    }
}

impl Div for F64 {
    type Output = F64;
    fn div(self, rhs: F64) -> F64 {
        F64(self.0 / rhs.0)
    }
}

impl Zero for F64 {
    fn zero() -> Self {
        F64(0.0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0.0
    }
}

impl One for F64 {
    fn one() -> Self {
        F64(1.0)
    }
}

impl Scalar for F64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        F64(num as f64 / den as f64)
    }

    fn from_rational(r: &BigRational) -> Self {
        F64(ToPrimitive::to_f64(r).unwrap_or(f64::NAN))
    }

    fn to_f64(&self) -> f64 {
        self.0
    }

    fn quantize_down(&self, q: u64) -> Self {
        F64((self.0 * q as f64).floor() / q as f64)
    }

    fn quantize_up(&self, q: u64) -> Self {
        F64((self.0 * q as f64).ceil() / q as f64)
    }

    fn on_grid(&self, q: u64) -> bool {
        let scaled = self.0 * q as f64;
        (scaled - scaled.round()).abs() <= FLOAT_TOL
    }

    fn slack() -> Self {
        F64(FLOAT_TOL)
    }

    fn render(&self) -> String {
        format!("{:.17e}", self.0)
    }
}

/// Parses a decimal or fraction literal to an exact rational.
///
/// Accepts `1/100`, `0.01`, `1e-3`, and plain integers. Decimal strings
/// are read exactly (`0.01` is 1/100, not the nearest binary64).
pub fn parse_rational(s: &str) -> Result<BigRational, Error> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse number: {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad())?;
        let d: BigInt = den.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = if digits.is_empty() || digits == "-" || digits == "+" {
        return Err(bad());
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let scale = frac_part.len() as i32 - exp;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::new(n, ten.pow(scale as u32))
    } else {
        BigRational::from_integer(n * ten.pow((-scale) as u32))
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        <BigRational as Scalar>::from_ratio(n, d)
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.01").unwrap(), rat(1, 100));
        assert_eq!(parse_rational("1/3").unwrap(), rat(1, 3));
        assert_eq!(parse_rational("1e-3").unwrap(), rat(1, 1000));
        assert_eq!(parse_rational("2.5e1").unwrap(), rat(25, 1));
        assert_eq!(parse_rational("1").unwrap(), rat(1, 1));
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn rational_quantization() {
        let v = rat(1, 4);
        assert_eq!(v.quantize_down(10), rat(2, 10));
        assert_eq!(v.quantize_up(10), rat(3, 10));
        assert!(rat(3, 10).on_grid(10));
        assert!(!rat(1, 4).on_grid(10));
        // grid points are fixed under both modes
        assert_eq!(rat(7, 10).quantize_down(10), rat(7, 10));
        assert_eq!(rat(7, 10).quantize_up(10), rat(7, 10));
    }

    #[test]
    fn float_quantization() {
        let v = F64(0.25);
        assert_eq!(v.quantize_down(10), F64(0.2));
        assert_eq!(v.quantize_up(10), F64(0.3));
        assert!(F64(0.3).on_grid(10));
    }

    #[test]
    fn le_approx_slack_modes() {
        assert!(!<BigRational as Scalar>::le_approx(
            &rat(1, 1_000_000_000_000_000),
            &rat(0, 1)
        ));
        assert!(F64::le_approx(&F64(1e-13), &F64(0.0)));
        assert!(!F64::le_approx(&F64(1e-11), &F64(0.0)));
    }
}
