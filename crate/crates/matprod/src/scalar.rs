//! Scalar abstraction so the same product code runs in f64 and in exact
//! rational arithmetic. `EXACT` distinguishes the two where behavior must
//! differ (zero tests, normalization strategy).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::fmt::{Debug, Display};

pub type Rat = BigRational;

pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + Debug
    + Display
    + num_traits::Signed
    + 'static
{
    /// True when arithmetic is exact and zero means literal zero.
    const EXACT: bool;

    fn from_i64(n: i64) -> Self;
    fn ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Parse a numeric literal: "p/q", integer, decimal, scientific.
    fn parse_exact(s: &str) -> Result<Self, String>;
    /// f64 into this scalar type; exact mode takes the literal binary value.
    fn from_f64_lossy(x: f64) -> Self;
    /// Natural log; must handle magnitudes outside f64 range in exact mode.
    fn ln_positive(&self) -> f64;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn parse_exact(s: &str) -> Result<Self, String> {
        parse_rational(s).map(|r| rational_to_f64(&r))
    }
    fn from_f64_lossy(x: f64) -> Self {
        x
    }
    fn ln_positive(&self) -> f64 {
        self.ln()
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn parse_exact(s: &str) -> Result<Self, String> {
        parse_rational(s)
    }
    fn from_f64_lossy(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }
    fn ln_positive(&self) -> f64 {
        rational_ln(self)
    }
}

/// Exact rational to f64, robust to numerator/denominator overflowing f64
/// range: shift both to comparable bit lengths first.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() && (v != 0.0 || r.is_zero()) {
            return v;
        }
    }
    let num = r.numer();
    let den = r.denom();
    let shift = num.bits() as i64 - den.bits() as i64;
    // scaled = r / 2^shift has magnitude in [1/2, 2]
    let scaled = if shift >= 0 {
        BigRational::new(num.clone(), den.clone() << shift as u64)
    } else {
        BigRational::new(num.clone() << (-shift) as u64, den.clone())
    };
    ToPrimitive::to_f64(&scaled).unwrap_or(0.0) * 2f64.powi(shift as i32)
}

/// Natural log of a positive rational with magnitude far outside f64 range.
pub fn rational_ln(r: &BigRational) -> f64 {
    assert!(r.is_positive(), "rational_ln needs a positive argument");
    let num = r.numer();
    let den = r.denom();
    let shift = num.bits() as i64 - den.bits() as i64;
    let scaled = if shift >= 0 {
        BigRational::new(num.clone(), den.clone() << shift as u64)
    } else {
        BigRational::new(num.clone() << (-shift) as u64, den.clone())
    };
    ToPrimitive::to_f64(&scaled).unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Shorthand for an exact fraction.
pub fn q(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parse "3/4", "-2", "0.125", "1e-3", "2.5e2" into an exact rational.
/// Decimal text parses exactly (every decimal literal is a dyadic-times-power-of-five
/// rational), so round-tripping probability vectors through config files is lossless.
pub fn parse_rational(text: &str) -> Result<Rat, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty numeric literal".into());
    }
    if let Some((a, b)) = s.split_once('/') {
        let num: BigInt = a.trim().parse().map_err(|e| format!("bad numerator {a:?}: {e}"))?;
        let den: BigInt = b.trim().parse().map_err(|e| format!("bad denominator {b:?}: {e}"))?;
        if den.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exp10) = match s.split_once(['e', 'E']) {
        Some((m, e)) => {
            let exp: i64 = e.parse().map_err(|err| format!("bad exponent {e:?}: {err}"))?;
            (m, exp)
        }
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let negative = int_part.starts_with('-');
    let int_digits = int_part.trim_start_matches(['-', '+']);
    let digits = format!("{int_digits}{frac_part}");
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("bad numeric literal {s:?}"));
    }
    let mut value = BigRational::from_integer(
        digits.parse::<BigInt>().map_err(|e| format!("bad digits in {s:?}: {e}"))?,
    );
    let scale = exp10 - frac_part.len() as i64;
    let ten = BigInt::from(10);
    if scale >= 0 {
        value *= BigRational::from_integer(ten.pow(scale as u32));
    } else {
        value /= BigRational::from_integer(ten.pow((-scale) as u32));
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/4").unwrap(), q(3, 4));
        assert_eq!(parse_rational("-2").unwrap(), q(-2, 1));
        assert_eq!(parse_rational("0.125").unwrap(), q(1, 8));
        assert_eq!(parse_rational("1e-3").unwrap(), q(1, 1000));
        assert_eq!(parse_rational("2.5e2").unwrap(), q(250, 1));
        assert_eq!(parse_rational("-0.4").unwrap(), q(-2, 5));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn huge_rational_log_and_f64() {
        // 3^500 / 2^700 is far outside f64 exponent range componentwise
        let r = BigRational::new(BigInt::from(3).pow(500), BigInt::from(2).pow(700));
        let expect = 500.0 * 3f64.ln() - 700.0 * 2f64.ln();
        assert!((rational_ln(&r) - expect).abs() < 1e-9);
        assert!((rational_to_f64(&r).ln() - expect).abs() < 1e-9);

        let tiny = BigRational::new(BigInt::from(1), BigInt::from(2).pow(2000));
        assert_eq!(rational_to_f64(&tiny), 0.0); // below f64 denormal range
        assert!((rational_ln(&tiny) + 2000.0 * 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn exactness_flags() {
        assert!(!<f64 as Scalar>::EXACT);
        assert!(<Rat as Scalar>::EXACT);
        assert_eq!(<Rat as Scalar>::ratio(1, 3) * <Rat as Scalar>::from_i64(3), q(1, 1));
    }
}
