//! Exact arithmetic helpers shared by every module.
//!
//! Rationals travel through JSON as `"p/q"` strings so that reports stay
//! exact and byte-stable.

use num_bigint::{BigInt, BigUint};
use num_integer::{Integer, Roots};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_u(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_big(num: &BigUint, den: &BigUint) -> Rational {
    Rational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

pub fn from_uint(n: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from(n.clone()))
}

pub fn from_u64(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"3"`, `"-2/7"` or a finite decimal such as `"0.125"`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches('-'), frac);
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let den = num_traits::pow(BigInt::from(10u8), frac.len());
        let r = Rational::new(n, den);
        return Ok(if negative { -r } else { r });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Lossy conversion used only for human-readable output.
pub fn approx(r: &Rational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // scale both sides down to a representable range
            let shift = r.denom().bits().max(r.numer().bits()).saturating_sub(900);
            let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// Nearest integer, ties rounded up.
pub fn round_nearest(r: &Rational) -> BigInt {
    (r + rat(1, 2)).floor().to_integer()
}

pub fn ceil_int(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

pub fn pow2(e: u64) -> BigUint {
    BigUint::one() << e
}

pub fn isqrt(n: u64) -> u64 {
    n.sqrt()
}

pub fn to_u64(n: &BigUint) -> Option<u64> {
    n.to_u64()
}

/// Precision (bits after the binary point) for certified enclosures.
pub const ENCLOSURE_BITS: u64 = 128;

/// A closed interval `[lo, hi]` with rational endpoints. Used where exact
/// rational sums would grow without bound; the endpoints are rounded
/// outward to multiples of `2^-ENCLOSURE_BITS`.
#[derive(Debug, Clone, PartialEq)]
pub struct Enclosure {
    pub lo: Rational,
    pub hi: Rational,
}

impl Enclosure {
    pub fn exact(r: Rational) -> Self {
        Enclosure { lo: r.clone(), hi: r }
    }

    pub fn zero() -> Self {
        Enclosure::exact(Rational::zero())
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn add(&self, other: &Enclosure) -> Enclosure {
        Enclosure { lo: &self.lo + &other.lo, hi: &self.hi + &other.hi }
    }

    /// Rounds the endpoints outward to the enclosure grid.
    pub fn rounded(&self) -> Enclosure {
        Enclosure { lo: round_down(&self.lo), hi: round_up(&self.hi) }
    }
}

fn grid() -> BigInt {
    BigInt::one() << ENCLOSURE_BITS
}

pub fn round_down(r: &Rational) -> Rational {
    let g = grid();
    if (&g % r.denom()).is_zero() {
        return r.clone();
    }
    let n = (r.numer() * &g).div_floor(r.denom());
    Rational::new(n, g)
}

pub fn round_up(r: &Rational) -> Rational {
    let g = grid();
    if (&g % r.denom()).is_zero() {
        return r.clone();
    }
    let n = (r.numer() * &g).div_ceil(r.denom());
    Rational::new(n, g)
}

/// Encloses `x^(1 + p/q)` for a nonnegative enclosure `x`.
pub fn pow_one_plus(x: &Enclosure, p: u32, q: u32) -> Enclosure {
    Enclosure { lo: pow_bound(&round_down(&x.lo), p, q, false), hi: pow_bound(&round_up(&x.hi), p, q, true) }
}

fn pow_bound(x: &Rational, p: u32, q: u32, upper: bool) -> Rational {
    if x.is_zero() {
        return Rational::zero();
    }
    if q == 1 {
        return num_traits::pow(x.clone(), (1 + p) as usize);
    }
    // x = m / 2^B on the grid; x^((q+p)/q) * 2^B = (m^(q+p) / 2^(B p))^(1/q)
    let g = grid();
    let m = (x * Rational::from_integer(g.clone())).to_integer().abs().to_biguint().unwrap_or_default();
    let pow = num_traits::pow(m, (q + p) as usize);
    let shifted = &pow >> (ENCLOSURE_BITS * p as u64);
    let root = shifted.nth_root(q);
    let num = if upper { root + 1u32 } else { root };
    Rational::new(BigInt::from(num), g)
}

pub mod serde_rational {
    use super::{fmt_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let text = match v {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(serde::de::Error::custom(format!("expected rational, got {other}"))),
        };
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

pub mod serde_rational_opt {
    use super::{fmt_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&fmt_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let v = Option::<serde_json::Value>::deserialize(d)?;
        match v {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(serde_json::Value::String(s)) => parse_rational(&s).map(Some).map_err(serde::de::Error::custom),
            Some(serde_json::Value::Number(n)) => {
                parse_rational(&n.to_string()).map(Some).map_err(serde::de::Error::custom)
            }
            Some(other) => Err(serde::de::Error::custom(format!("expected rational, got {other}"))),
        }
    }
}

pub mod serde_biguint {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let text = match v {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(serde::de::Error::custom(format!("expected integer, got {other}"))),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

pub mod rational_vec {
    use super::{fmt_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(fmt_rational).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw = Vec::<serde_json::Value>::deserialize(d)?;
        raw.into_iter()
            .map(|v| {
                let text = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) => n.to_string(),
                    other => return Err(serde::de::Error::custom(format!("expected rational, got {other}"))),
                };
                parse_rational(&text).map_err(serde::de::Error::custom)
            })
            .collect()
    }
}

/// Serializes a list of rationals as strings.
pub fn rational_strings(values: &[Rational]) -> Vec<String> {
    values.iter().map(fmt_rational).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("-0.125").unwrap(), rat(-1, 8));
        assert_eq!(parse_rational("7").unwrap(), rat(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn nearest_rounds_half_up() {
        assert_eq!(round_nearest(&rat(1, 2)), BigInt::from(1));
        assert_eq!(round_nearest(&rat(5, 4)), BigInt::from(1));
        assert_eq!(round_nearest(&rat(7, 4)), BigInt::from(2));
    }

    #[test]
    fn fractional_power_brackets_value() {
        // 4^(3/2) = 8
        let e = pow_one_plus(&Enclosure::exact(rat(4, 1)), 1, 2);
        assert!(e.lo <= rat(8, 1) && rat(8, 1) <= e.hi);
        assert!(&e.hi - &e.lo < rat(1, 1_000_000));
        let sq = pow_one_plus(&Enclosure::exact(rat(3, 1)), 1, 1);
        assert_eq!(sq.lo, rat(9, 1));
    }

    #[test]
    fn rounding_is_outward() {
        let third = rat(1, 3);
        assert!(round_down(&third) < third);
        assert!(round_up(&third) > third);
        assert_eq!(round_down(&rat(1, 4)), rat(1, 4));
    }
}
