//! Exact decimal numbers and the integer/real transformation used by both
//! encryption schemes.
//!
//! Every real quantity in the simulator is a [`ScaledDecimal`]: an
//! arbitrary-precision mantissa over a power of ten. Encoding multiplies by
//! `10^sigma`; decoding maps a residue modulo an odd `m` back to a signed
//! decimal, treating the upper half of `[0, m)` as negative.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FixedPointError {
    #[error("{value} has {digits} fraction digits, more than the precision {sigma}")]
    PrecisionExceeded { value: String, digits: u32, sigma: u32 },
    #[error("residue {z} outside [0, {m})")]
    OutOfRange { z: String, m: String },
    #[error("modulus {0} is even")]
    EvenModulus(String),
    #[error("|10^{scale} * {value}| exceeds (m-1)/2 for m = {m}")]
    BoundViolated { value: String, scale: u32, m: String },
    #[error("cannot parse decimal {0:?}")]
    Parse(String),
}

pub fn pow10(exp: u32) -> BigInt {
    num_traits::pow(BigInt::from(10u32), exp as usize)
}

/// An exact decimal `mantissa / 10^scale`.
///
/// Equality, ordering and hashing are defined on the value, so `1.50` and
/// `1.5` compare equal.
#[derive(Clone, Debug)]
pub struct ScaledDecimal {
    mantissa: BigInt,
    scale: u32,
}

impl ScaledDecimal {
    pub fn new(mantissa: impl Into<BigInt>, scale: u32) -> Self {
        ScaledDecimal {
            mantissa: mantissa.into(),
            scale,
        }
    }

    pub fn zero() -> Self {
        Self::new(0, 0)
    }

    pub fn one() -> Self {
        Self::new(1, 0)
    }

    pub fn from_integer(value: impl Into<BigInt>) -> Self {
        Self::new(value, 0)
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.fraction_digits() == 0
    }

    pub fn abs(&self) -> Self {
        Self::new(self.mantissa.abs(), self.scale)
    }

    /// Strips trailing zero digits from the mantissa.
    pub fn reduced(&self) -> Self {
        if self.mantissa.is_zero() {
            return Self::zero();
        }
        let ten = BigInt::from(10u32);
        let mut mantissa = self.mantissa.clone();
        let mut scale = self.scale;
        while scale > 0 {
            let (q, r) = mantissa.div_rem(&ten);
            if !r.is_zero() {
                break;
            }
            mantissa = q;
            scale -= 1;
        }
        Self::new(mantissa, scale)
    }

    /// Number of significant fraction digits (after reduction).
    pub fn fraction_digits(&self) -> u32 {
        self.reduced().scale
    }

    /// Re-express with exactly `scale` fraction digits. Fails if that would
    /// drop a nonzero digit.
    pub fn with_scale(&self, scale: u32) -> Option<Self> {
        if scale >= self.scale {
            Some(Self::new(&self.mantissa * pow10(scale - self.scale), scale))
        } else {
            let (q, r) = self.mantissa.div_rem(&pow10(self.scale - scale));
            r.is_zero().then(|| Self::new(q, scale))
        }
    }

    /// Rounds to `sigma` fraction digits, half away from zero.
    pub fn quantize(&self, sigma: u32) -> Self {
        if self.scale <= sigma {
            return self.clone();
        }
        let divisor = pow10(self.scale - sigma);
        let (q, r) = self.mantissa.abs().div_rem(&divisor);
        let q = if r * 2u32 >= divisor { q + 1u32 } else { q };
        let q = if self.mantissa.is_negative() { -q } else { q };
        Self::new(q, sigma)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.mantissa.clone(), pow10(self.scale))
    }

    /// Converts a rational whose denominator divides a power of ten.
    pub fn from_rational(value: &BigRational) -> Option<Self> {
        let mut den = value.denom().clone();
        let mut twos = 0u32;
        let mut fives = 0u32;
        let two = BigInt::from(2u32);
        let five = BigInt::from(5u32);
        while den.is_even() {
            den /= &two;
            twos += 1;
        }
        while (&den % &five).is_zero() {
            den /= &five;
            fives += 1;
        }
        if !den.is_one() {
            return None;
        }
        let scale = twos.max(fives);
        let mantissa = value.numer() * pow10(scale) / value.denom();
        Some(Self::new(mantissa, scale))
    }

    pub fn to_f64(&self) -> f64 {
        self.to_string().parse().unwrap_or(f64::NAN)
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u32) {
        let scale = self.scale.max(other.scale);
        let a = &self.mantissa * pow10(scale - self.scale);
        let b = &other.mantissa * pow10(scale - other.scale);
        (a, b, scale)
    }
}

impl PartialEq for ScaledDecimal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ScaledDecimal {}

impl PartialOrd for ScaledDecimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScaledDecimal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl std::hash::Hash for ScaledDecimal {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let r = self.reduced();
        r.mantissa.hash(state);
        r.scale.hash(state);
    }
}

impl Add for &ScaledDecimal {
    type Output = ScaledDecimal;
    fn add(self, rhs: &ScaledDecimal) -> ScaledDecimal {
        let (a, b, scale) = self.aligned(rhs);
        ScaledDecimal::new(a + b, scale)
    }
}

impl Sub for &ScaledDecimal {
    type Output = ScaledDecimal;
    fn sub(self, rhs: &ScaledDecimal) -> ScaledDecimal {
        let (a, b, scale) = self.aligned(rhs);
        ScaledDecimal::new(a - b, scale)
    }
}

impl Mul for &ScaledDecimal {
    type Output = ScaledDecimal;
    fn mul(self, rhs: &ScaledDecimal) -> ScaledDecimal {
        ScaledDecimal::new(&self.mantissa * &rhs.mantissa, self.scale + rhs.scale)
    }
}

impl Neg for &ScaledDecimal {
    type Output = ScaledDecimal;
    fn neg(self) -> ScaledDecimal {
        ScaledDecimal::new(-&self.mantissa, self.scale)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for ScaledDecimal {
            type Output = ScaledDecimal;
            fn $method(self, rhs: ScaledDecimal) -> ScaledDecimal {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for ScaledDecimal {
    type Output = ScaledDecimal;
    fn neg(self) -> ScaledDecimal {
        -&self
    }
}

impl std::iter::Sum for ScaledDecimal {
    fn sum<I: Iterator<Item = ScaledDecimal>>(iter: I) -> Self {
        iter.fold(ScaledDecimal::zero(), |acc, x| &acc + &x)
    }
}

impl fmt::Display for ScaledDecimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.reduced();
        let digits = r.mantissa.abs().to_string();
        let sign = if r.mantissa.sign() == Sign::Minus { "-" } else { "" };
        if r.scale == 0 {
            return write!(f, "{sign}{digits}");
        }
        let scale = r.scale as usize;
        let padded = if digits.len() <= scale {
            format!("{}{}", "0".repeat(scale - digits.len() + 1), digits)
        } else {
            digits
        };
        let (int, frac) = padded.split_at(padded.len() - scale);
        write!(f, "{sign}{int}.{frac}")
    }
}

impl FromStr for ScaledDecimal {
    type Err = FixedPointError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FixedPointError::Parse(s.to_string());
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int, frac) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if (int.is_empty() && frac.is_empty())
            || !int.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
        {
            return Err(err());
        }
        let joined = format!("{int}{frac}");
        let mantissa: BigInt = if joined.is_empty() {
            BigInt::zero()
        } else {
            joined.parse().map_err(|_| err())?
        };
        let mantissa = if neg { -mantissa } else { mantissa };
        Ok(ScaledDecimal::new(mantissa, frac.len() as u32))
    }
}

impl From<i64> for ScaledDecimal {
    fn from(v: i64) -> Self {
        ScaledDecimal::from_integer(v)
    }
}

impl Serialize for ScaledDecimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ScaledDecimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand used heavily in tests and fixtures. Panics on malformed input.
pub fn dec(s: &str) -> ScaledDecimal {
    s.parse().unwrap_or_else(|e| panic!("{e}"))
}

/// Precision shared by every participant of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointCodec {
    pub sigma: u32,
}

impl FixedPointCodec {
    pub fn new(sigma: u32) -> Self {
        FixedPointCodec { sigma }
    }

    /// `10^sigma * r`, rejecting values that carry more than `sigma` digits.
    pub fn encode(&self, r: &ScaledDecimal) -> Result<BigInt, FixedPointError> {
        encode(r, self.sigma)
    }

    pub fn decode(&self, z: &BigInt, m: &BigInt) -> Result<ScaledDecimal, FixedPointError> {
        t_transform(z, self.sigma, m)
    }
}

pub fn encode(r: &ScaledDecimal, sigma: u32) -> Result<BigInt, FixedPointError> {
    r.with_scale(sigma)
        .map(|v| v.mantissa)
        .ok_or_else(|| FixedPointError::PrecisionExceeded {
            value: r.to_string(),
            digits: r.fraction_digits(),
            sigma,
        })
}

fn check_odd(m: &BigInt) -> Result<(), FixedPointError> {
    if m.is_even() || !m.is_positive() {
        return Err(FixedPointError::EvenModulus(m.to_string()));
    }
    Ok(())
}

/// Maps a residue `z` in `[0, m)` to `z / 10^s` when `z <= (m-1)/2` and to
/// `(z - m) / 10^s` otherwise.
pub fn t_transform(z: &BigInt, s: u32, m: &BigInt) -> Result<ScaledDecimal, FixedPointError> {
    check_odd(m)?;
    if z.is_negative() || z >= m {
        return Err(FixedPointError::OutOfRange {
            z: z.to_string(),
            m: m.to_string(),
        });
    }
    let half = (m - 1u32) / 2u32;
    let signed = if *z <= half { z.clone() } else { z - m };
    Ok(ScaledDecimal::new(signed, s))
}

/// Encodes `r` at scale `s`, reduces modulo `m` and decodes again.
pub fn roundtrip(r: &ScaledDecimal, s: u32, m: &BigInt) -> Result<ScaledDecimal, FixedPointError> {
    check_odd(m)?;
    let z = encode(r, s)?;
    let half = (m - 1u32) / 2u32;
    if z.abs() > half {
        return Err(FixedPointError::BoundViolated {
            value: r.to_string(),
            scale: s,
            m: m.to_string(),
        });
    }
    t_transform(&z.mod_floor(m), s, m)
}
