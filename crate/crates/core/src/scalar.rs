//! Real-valued quantities with an explicit comparison policy.
//!
//! A [`Scalar`] is either an exact, normalized big rational or a binary
//! float. Every comparison goes through the scalar's [`Policy`]:
//!
//! * `Exact` decides `<`, `<=` and `==` on the stored values with no slack.
//! * `Epsilon(e)` reads `a < b` as `a < b - e` and `a <= b` as `a <= b + e`,
//!   and decides equality as `|a - b| <= e`, all in `f64`.
//!
//! Arithmetic on two exact rationals stays exact. Anything touching a float
//! yields a float, and the resulting policy is the looser of the two inputs.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// How two scalars are compared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Policy {
    Exact,
    Epsilon(f64),
}

impl Policy {
    pub fn epsilon(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Parameter(format!(
                "comparison epsilon must be finite and nonnegative, got {eps}"
            )));
        }
        Ok(Policy::Epsilon(eps))
    }

    /// The looser of two policies.
    pub fn combine(self, other: Policy) -> Policy {
        match (self, other) {
            (Policy::Exact, p) | (p, Policy::Exact) => p,
            (Policy::Epsilon(a), Policy::Epsilon(b)) => Policy::Epsilon(a.max(b)),
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Policy::Exact => 0.0,
            Policy::Epsilon(e) => e,
        }
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Rational(BigRational),
    Float(f64),
}

#[derive(Clone, Debug)]
pub struct Scalar {
    repr: Repr,
    policy: Policy,
}

impl Scalar {
    pub fn exact(value: BigRational) -> Self {
        Scalar {
            repr: Repr::Rational(value),
            policy: Policy::Exact,
        }
    }

    /// Exact `num/den`. Panics on a zero denominator.
    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn integer(value: i64) -> Self {
        Scalar::exact(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn zero() -> Self {
        Scalar::exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::exact(BigRational::one())
    }

    pub fn float(value: f64, policy: Policy) -> Self {
        Scalar {
            repr: Repr::Float(value),
            policy,
        }
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Rational(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match &self.repr {
            Repr::Rational(r) => Some(r),
            Repr::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match &self.repr {
            Repr::Rational(r) => rational_to_f64(r),
            Repr::Float(v) => *v,
        }
    }

    /// The same value on the float backend with the given policy.
    pub fn to_float(&self, policy: Policy) -> Scalar {
        Scalar::float(self.to_f64(), policy)
    }

    /// Exact rational value of this scalar (floats convert bit-exactly).
    pub fn to_rational(&self) -> Option<BigRational> {
        match &self.repr {
            Repr::Rational(r) => Some(r.clone()),
            Repr::Float(v) => BigRational::from_float(*v),
        }
    }

    pub fn abs(&self) -> Scalar {
        let repr = match &self.repr {
            Repr::Rational(r) => Repr::Rational(r.abs()),
            Repr::Float(v) => Repr::Float(v.abs()),
        };
        Scalar {
            repr,
            policy: self.policy,
        }
    }

    /// Exact-zero test (no tolerance).
    pub fn is_exact_zero(&self) -> bool {
        match &self.repr {
            Repr::Rational(r) => r.is_zero(),
            Repr::Float(v) => *v == 0.0,
        }
    }

    pub fn checked_div(&self, rhs: &Scalar) -> Option<Scalar> {
        if rhs.is_exact_zero() {
            return None;
        }
        Some(self / rhs)
    }

    pub fn recip(&self) -> Option<Scalar> {
        Scalar::one().with_policy(self.policy).checked_div(self)
    }

    pub fn with_policy(mut self, policy: Policy) -> Scalar {
        self.policy = policy;
        self
    }

    /// Ordering of the stored values, ignoring the comparison policy.
    pub fn total_cmp(&self, other: &Scalar) -> Ordering {
        match (&self.repr, &other.repr) {
            (Repr::Rational(a), Repr::Rational(b)) => a.cmp(b),
            (Repr::Float(a), Repr::Float(b)) => a.total_cmp(b),
            _ => match (self.to_rational(), other.to_rational()) {
                (Some(a), Some(b)) => a.cmp(&b),
                _ => self.to_f64().total_cmp(&other.to_f64()),
            },
        }
    }

    /// Policy-aware `self < other`.
    pub fn lt(&self, other: &Scalar) -> bool {
        match self.policy.combine(other.policy) {
            Policy::Exact => self.total_cmp(other) == Ordering::Less,
            Policy::Epsilon(e) => self.to_f64() < other.to_f64() - e,
        }
    }

    /// Policy-aware `self <= other`.
    pub fn le(&self, other: &Scalar) -> bool {
        match self.policy.combine(other.policy) {
            Policy::Exact => self.total_cmp(other) != Ordering::Greater,
            Policy::Epsilon(e) => self.to_f64() <= other.to_f64() + e,
        }
    }

    pub fn gt(&self, other: &Scalar) -> bool {
        other.lt(self)
    }

    pub fn ge(&self, other: &Scalar) -> bool {
        other.le(self)
    }

    /// Policy-aware equality: exact equality, or `|a - b| <= e`.
    pub fn approx_eq(&self, other: &Scalar) -> bool {
        match self.policy.combine(other.policy) {
            Policy::Exact => self.total_cmp(other) == Ordering::Equal,
            Policy::Epsilon(e) => (self.to_f64() - other.to_f64()).abs() <= e,
        }
    }

    /// Policy-aware zero test.
    pub fn is_zero(&self) -> bool {
        match self.policy {
            Policy::Exact => self.is_exact_zero(),
            Policy::Epsilon(e) => self.to_f64().abs() <= e,
        }
    }

    pub fn max_of<'a>(a: &'a Scalar, b: &'a Scalar) -> &'a Scalar {
        if a.total_cmp(b) == Ordering::Less {
            b
        } else {
            a
        }
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Very large numerator/denominator pairs: scale both down first.
    let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
    let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

fn binary(lhs: &Scalar, rhs: &Scalar, exact: impl Fn(&BigRational, &BigRational) -> BigRational, float: impl Fn(f64, f64) -> f64) -> Scalar {
    let policy = lhs.policy.combine(rhs.policy);
    let repr = match (&lhs.repr, &rhs.repr) {
        (Repr::Rational(a), Repr::Rational(b)) => Repr::Rational(exact(a, b)),
        _ => Repr::Float(float(lhs.to_f64(), rhs.to_f64())),
    };
    Scalar { repr, policy }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl<'a> $trait<&'a Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                binary(self, rhs, |a, b| a $op b, |a, b| a $op b)
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);
forward_binop!(Mul, mul, *);
forward_binop!(Div, div, /);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        let repr = match &self.repr {
            Repr::Rational(r) => Repr::Rational(-r),
            Repr::Float(v) => Repr::Float(-v),
        };
        Scalar {
            repr,
            policy: self.policy,
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

/// Value identity: exact rational equality, or bitwise-equal floats.
/// Mixed representations compare through the float's exact rational value.
impl PartialEq for Scalar {
    fn eq(&self, other: &Scalar) -> bool {
        match (&self.repr, &other.repr) {
            (Repr::Rational(a), Repr::Rational(b)) => a == b,
            (Repr::Float(a), Repr::Float(b)) => a.to_bits() == b.to_bits() || (a == b),
            _ => self.total_cmp(other) == Ordering::Equal,
        }
    }
}

impl From<BigRational> for Scalar {
    fn from(value: BigRational) -> Self {
        Scalar::exact(value)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Rational(r) => write!(f, "{}", format_rational(r)),
            Repr::Float(v) => write!(f, "{v:?}"),
        }
    }
}

/// `"p/q"` form of a rational, or `"p"` when the denominator is one.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"p/q"`, an integer, or a decimal string (`"0.25"`, `"-1.5e-3"`)
/// into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(BigRational::new(num, den));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let exp: i64 = s[i + 1..].parse().map_err(|_| bad())?;
            (&s[..i], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(&all).map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i64;
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale.unsigned_abs() > 100_000 {
        return Err(bad());
    }
    let factor = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    Ok(if negative { -value } else { value })
}

impl FromStr for Scalar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_rational(s).map(Scalar::exact)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
