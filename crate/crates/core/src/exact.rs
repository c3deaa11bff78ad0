//! Exact extended nonnegative rationals.
//!
//! Every distance, privacy loss and budget amount in the crate is an
//! [`ExtRational`]: a nonnegative rational or `+inf`. Accounting never goes
//! through floating point.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtRational {
    Finite(BigRational),
    Infinite,
}

impl ExtRational {
    pub fn zero() -> Self {
        ExtRational::Finite(BigRational::zero())
    }

    pub fn one() -> Self {
        ExtRational::Finite(BigRational::one())
    }

    pub fn infinity() -> Self {
        ExtRational::Infinite
    }

    pub fn from_u64(n: u64) -> Self {
        ExtRational::Finite(BigRational::from_integer(BigInt::from(n)))
    }

    /// `numer / denom`. Panics if `denom == 0`.
    pub fn ratio(numer: u64, denom: u64) -> Self {
        assert!(denom != 0, "zero denominator");
        ExtRational::Finite(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    /// Exact binary value of a finite nonnegative float.
    pub fn from_f64(x: f64) -> Option<Self> {
        if x.is_nan() || x < 0.0 {
            return None;
        }
        if x.is_infinite() {
            return Some(ExtRational::Infinite);
        }
        BigRational::from_float(x).map(ExtRational::Finite)
    }

    pub fn from_rational(r: BigRational) -> Result<Self> {
        if r.is_negative() {
            return Err(Error::NegativeBudget);
        }
        Ok(ExtRational::Finite(r))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtRational::Finite(r) if r.is_zero())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRational::Infinite)
    }

    pub fn as_finite(&self) -> Option<&BigRational> {
        match self {
            ExtRational::Finite(r) => Some(r),
            ExtRational::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtRational::Finite(r) => r.to_f64().unwrap_or(f64::INFINITY),
            ExtRational::Infinite => f64::INFINITY,
        }
    }

    /// `self - rhs`, or `None` when the result would be negative.
    /// `inf - x` is `inf` for every `x`.
    pub fn checked_sub(&self, rhs: &ExtRational) -> Option<ExtRational> {
        match (self, rhs) {
            (ExtRational::Infinite, _) => Some(ExtRational::Infinite),
            (ExtRational::Finite(_), ExtRational::Infinite) => None,
            (ExtRational::Finite(a), ExtRational::Finite(b)) => {
                if a < b {
                    None
                } else {
                    Some(ExtRational::Finite(a - b))
                }
            }
        }
    }

    /// `self / rhs` for a positive divisor. `x / inf` is zero; `inf / x` is inf.
    pub fn checked_div(&self, rhs: &ExtRational) -> Option<ExtRational> {
        if rhs.is_zero() {
            return None;
        }
        Some(match (self, rhs) {
            (ExtRational::Infinite, ExtRational::Infinite) => return None,
            (ExtRational::Infinite, _) => ExtRational::Infinite,
            (ExtRational::Finite(_), ExtRational::Infinite) => ExtRational::zero(),
            (ExtRational::Finite(a), ExtRational::Finite(b)) => ExtRational::Finite(a / b),
        })
    }

    pub fn square(&self) -> ExtRational {
        self * self
    }

    pub fn max(self, other: ExtRational) -> ExtRational {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for ExtRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRational::Infinite, ExtRational::Infinite) => Ordering::Equal,
            (ExtRational::Infinite, _) => Ordering::Greater,
            (_, ExtRational::Infinite) => Ordering::Less,
            (ExtRational::Finite(a), ExtRational::Finite(b)) => a.cmp(b),
        }
    }
}

impl Add for &ExtRational {
    type Output = ExtRational;
    fn add(self, rhs: &ExtRational) -> ExtRational {
        match (self, rhs) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => ExtRational::Finite(a + b),
            _ => ExtRational::Infinite,
        }
    }
}

impl Add for ExtRational {
    type Output = ExtRational;
    fn add(self, rhs: ExtRational) -> ExtRational {
        &self + &rhs
    }
}

// 0 * inf = 0, so every map built from products keeps map(0) = 0.
impl Mul for &ExtRational {
    type Output = ExtRational;
    fn mul(self, rhs: &ExtRational) -> ExtRational {
        match (self, rhs) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => ExtRational::Finite(a * b),
            (a, b) if a.is_zero() || b.is_zero() => ExtRational::zero(),
            _ => ExtRational::Infinite,
        }
    }
}

impl Mul for ExtRational {
    type Output = ExtRational;
    fn mul(self, rhs: ExtRational) -> ExtRational {
        &self * &rhs
    }
}

impl From<u64> for ExtRational {
    fn from(n: u64) -> Self {
        ExtRational::from_u64(n)
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::Finite(r) => write!(f, "{r}"),
            ExtRational::Infinite => write!(f, "inf"),
        }
    }
}

/// Parses `inf`, `a/b`, or a decimal such as `0.4`, `12`, `1.5e-3`, exactly.
impl FromStr for ExtRational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BudgetParse(s.to_string());
        let t = s.trim();
        if t.is_empty() {
            return Err(bad());
        }
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => return Ok(ExtRational::Infinite),
            _ => {}
        }
        if let Some((n, d)) = t.split_once('/') {
            let n = parse_unsigned_int(n.trim()).ok_or_else(bad)?;
            let d = parse_unsigned_int(d.trim()).ok_or_else(bad)?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(ExtRational::Finite(BigRational::new(n, d)));
        }
        parse_decimal(t).map(ExtRational::Finite).ok_or_else(bad)
    }
}

impl Serialize for ExtRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Accepts the string forms of [`FromStr`], or a JSON number read through
/// its shortest decimal representation.
impl<'de> Deserialize<'de> for ExtRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;

        impl de::Visitor<'_> for Visitor {
            type Value = ExtRational;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative number, `a/b`, or `inf`")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtRational, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtRational, E> {
                Ok(ExtRational::from_u64(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtRational, E> {
                u64::try_from(v)
                    .map(ExtRational::from_u64)
                    .map_err(|_| E::custom(Error::BudgetParse(v.to_string())))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExtRational, E> {
                if v.is_infinite() && v > 0.0 {
                    return Ok(ExtRational::Infinite);
                }
                v.to_string().parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(Visitor)
    }
}

fn parse_unsigned_int(s: &str) -> Option<BigInt> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.strip_prefix('+').unwrap_or(s);
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse::<BigInt>().ok()? / 10;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}
