//! Scalar abstractions shared by the numerical and exact layers.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, NumAssign, Signed, ToPrimitive, Zero};

/// Floating-point scalar used by the numerical layers (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable")
    }

    /// Lossy conversion to `f64` (NaN if not representable).
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Scalar for the exact 1-D engine.
///
/// `BigRational` compares exactly; `f64` compares with a relative tolerance of `1e-12`.
pub trait ExactScalar:
    Clone + Debug + Display + PartialEq + PartialOrd + Num + Signed + Send + Sync + 'static
{
    /// True when comparisons are exact.
    const EXACT: bool;

    fn compare(&self, other: &Self) -> Ordering;
    fn from_f64_exact(x: f64) -> Option<Self>;
    fn approx_f64(&self) -> f64;
    fn from_int(n: i64) -> Self;
    /// Square root when it is representable in `Self`.
    fn sqrt_exact(&self) -> Option<Self>;

    fn eq_exact(&self, other: &Self) -> bool {
        self.compare(other) == Ordering::Equal
    }
    fn lt_exact(&self, other: &Self) -> bool {
        self.compare(other) == Ordering::Less
    }
    fn le_exact(&self, other: &Self) -> bool {
        self.compare(other) != Ordering::Greater
    }
    fn sign_cmp(&self) -> Ordering {
        self.compare(&Self::zero())
    }
    fn is_pos(&self) -> bool {
        self.sign_cmp() == Ordering::Greater
    }
    fn is_neg(&self) -> bool {
        self.sign_cmp() == Ordering::Less
    }
    fn is_zero_exact(&self) -> bool {
        self.sign_cmp() == Ordering::Equal
    }
    fn min_of(a: &Self, b: &Self) -> Self {
        if a.le_exact(b) {
            a.clone()
        } else {
            b.clone()
        }
    }
    fn max_of(a: &Self, b: &Self) -> Self {
        if a.le_exact(b) {
            b.clone()
        } else {
            a.clone()
        }
    }
    fn half() -> Self {
        Self::one() / Self::from_int(2)
    }
}

impl ExactScalar for BigRational {
    const EXACT: bool = true;

    fn compare(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
    fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }
    fn approx_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn sqrt_exact(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let (n, d) = (self.numer(), self.denom());
        let (rn, rd) = (n.sqrt(), d.sqrt());
        if &(&rn * &rn) == n && &(&rd * &rd) == d {
            Some(BigRational::new(rn, rd))
        } else {
            None
        }
    }
}

impl ExactScalar for f64 {
    const EXACT: bool = false;

    fn compare(&self, other: &Self) -> Ordering {
        let scale = 1f64.max(self.abs()).max(other.abs());
        if (self - other).abs() <= 1e-12 * scale {
            Ordering::Equal
        } else if self < other {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
    fn from_f64_exact(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }
    fn approx_f64(&self) -> f64 {
        *self
    }
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn sqrt_exact(&self) -> Option<Self> {
        if *self < 0.0 {
            (self.compare(&0.0) == Ordering::Equal).then_some(0.0)
        } else {
            Some(self.sqrt())
        }
    }
}

/// Parses `"p/q"`, integers and decimals (optionally with an exponent) into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let digits = digits / BigInt::from(10);
    let ten = BigRational::from_integer(BigInt::from(10));
    let scale = exp - frac_part.len() as i32;
    let mut r = BigRational::from_integer(digits);
    if scale >= 0 {
        r *= num_traits::pow(ten, scale as usize);
    } else {
        r /= num_traits::pow(ten, (-scale) as usize);
    }
    Some(if neg { -r } else { r })
}

/// Canonical text form of a rational: `"p"` or `"p/q"`.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_rational_forms() {
        assert_eq!(parse_rational("3/4"), Some(q(3, 4)));
        assert_eq!(parse_rational("-0.25"), Some(q(-1, 4)));
        assert_eq!(parse_rational("1e-3"), Some(q(1, 1000)));
        assert_eq!(parse_rational("2.5E2"), Some(q(250, 1)));
        assert_eq!(parse_rational("7"), Some(q(7, 1)));
        assert_eq!(parse_rational(".5"), Some(q(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn format_roundtrip() {
        for r in [q(3, 4), q(-7, 1), q(0, 1), q(-22, 7)] {
            assert_eq!(parse_rational(&format_rational(&r)), Some(r));
        }
    }

    #[test]
    fn exact_sqrt() {
        assert_eq!(q(9, 4).sqrt_exact(), Some(q(3, 2)));
        assert_eq!(q(2, 1).sqrt_exact(), None);
        assert_eq!(q(-1, 1).sqrt_exact(), None);
        assert_eq!(4.0f64.sqrt_exact(), Some(2.0));
    }

    #[test]
    fn float_compare_tolerant() {
        assert!(1.0f64.eq_exact(&(1.0 + 1e-14)));
        assert!(!1.0f64.eq_exact(&(1.0 + 1e-9)));
    }
}
