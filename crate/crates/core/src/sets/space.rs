use std::fmt;

use num_integer::Roots;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Countable base spaces, each identified with ω by a fixed bijection.
///
/// * products (`omega-squared`, `omega-times-omega`) use the Cantor
///   pairing `(i, j) ↦ (i+j)(i+j+1)/2 + j`;
/// * `two-copies` interleaves: `(c, n) ↦ 2n + c`;
/// * `n-subsets` uses the colex rank `{c_1 < … < c_n} ↦ Σ C(c_k, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseSpace {
    Omega,
    OmegaSquared,
    TwoCopies,
    NSubsets { n: u32 },
    OmegaTimesOmega,
}

impl Default for BaseSpace {
    fn default() -> Self {
        BaseSpace::Omega
    }
}

impl fmt::Display for BaseSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseSpace::Omega => write!(f, "omega"),
            BaseSpace::OmegaSquared => write!(f, "omega-squared"),
            BaseSpace::TwoCopies => write!(f, "two-copies"),
            BaseSpace::NSubsets { n } => write!(f, "[omega]^{n}"),
            BaseSpace::OmegaTimesOmega => write!(f, "omega-times-omega"),
        }
    }
}

/// A decoded point of a base space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Nat(u64),
    Pair(u64, u64),
    Subset(Vec<u64>),
}

impl BaseSpace {
    pub fn is_product(self) -> bool {
        matches!(self, BaseSpace::OmegaSquared | BaseSpace::OmegaTimesOmega)
    }

    /// Product spaces are interchangeable for membership purposes.
    pub fn compatible(self, other: BaseSpace) -> bool {
        self == other || (self.is_product() && other.is_product())
    }

    pub fn expect(self, other: BaseSpace) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch { expected: self.to_string(), found: other.to_string() })
        }
    }

    pub fn encode(self, point: &Point) -> Result<u64> {
        match (self, point) {
            (BaseSpace::Omega, Point::Nat(n)) => Ok(*n),
            (BaseSpace::OmegaSquared | BaseSpace::OmegaTimesOmega, Point::Pair(i, j)) => pair(*i, *j),
            (BaseSpace::TwoCopies, Point::Pair(c, n)) if *c < 2 => {
                n.checked_mul(2).and_then(|v| v.checked_add(*c)).ok_or_else(overflow)
            }
            (BaseSpace::NSubsets { n }, Point::Subset(elems)) => colex_rank(n, elems),
            (BaseSpace::NSubsets { n }, Point::Pair(a, b)) => colex_rank(n, &[*a, *b]),
            (BaseSpace::NSubsets { n: 1 }, Point::Nat(a)) => colex_rank(1, &[*a]),
            _ => Err(Error::Malformed(format!("point {point:?} does not belong to {self}"))),
        }
    }

    pub fn decode(self, code: u64) -> Point {
        match self {
            BaseSpace::Omega => Point::Nat(code),
            BaseSpace::OmegaSquared | BaseSpace::OmegaTimesOmega => {
                let (i, j) = unpair(code);
                Point::Pair(i, j)
            }
            BaseSpace::TwoCopies => Point::Pair(code % 2, code / 2),
            BaseSpace::NSubsets { n } => Point::Subset(colex_unrank(n, code)),
        }
    }
}

fn overflow() -> Error {
    Error::EffortExceeded("encoded point exceeds 64-bit range".into())
}

/// Cantor pairing of `(i, j)`.
pub fn pair(i: u64, j: u64) -> Result<u64> {
    let w = i.checked_add(j).ok_or_else(overflow)?;
    let tri = (w as u128) * (w as u128 + 1) / 2 + j as u128;
    u64::try_from(tri).map_err(|_| overflow())
}

pub fn unpair(z: u64) -> (u64, u64) {
    // w = floor((sqrt(8z + 1) - 1) / 2)
    let z128 = z as u128;
    let mut w = (((8 * z128 + 1).sqrt() - 1) / 2) as u64;
    while (w as u128) * (w as u128 + 1) / 2 > z128 {
        w -= 1;
    }
    while (w as u128 + 1) * (w as u128 + 2) / 2 <= z128 {
        w += 1;
    }
    let t = (w as u128) * (w as u128 + 1) / 2;
    let j = (z128 - t) as u64;
    (w - j, j)
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn colex_rank(n: u32, elems: &[u64]) -> Result<u64> {
    let mut sorted = elems.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != n as usize {
        return Err(Error::Malformed(format!("expected an {n}-element subset, got {elems:?}")));
    }
    let mut rank: u128 = 0;
    for (k, &c) in sorted.iter().enumerate() {
        rank += binomial(c, k as u64 + 1);
    }
    u64::try_from(rank).map_err(|_| overflow())
}

fn colex_unrank(n: u32, mut code: u64) -> Vec<u64> {
    let mut out = Vec::with_capacity(n as usize);
    for k in (1..=n as u64).rev() {
        // largest c with C(c, k) <= code
        let mut lo = k - 1;
        let mut hi = k - 1;
        while binomial(hi, k) <= code as u128 {
            lo = hi;
            hi = hi.saturating_mul(2).max(k);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if binomial(mid, k) <= code as u128 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        code -= binomial(lo, k) as u64;
        out.push(lo);
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn cantor_pairing_small_values() {
        assert_eq!(pair(0, 0).unwrap(), 0);
        assert_eq!(pair(1, 0).unwrap(), 1);
        assert_eq!(pair(0, 1).unwrap(), 2);
        assert_eq!(pair(9, 9).unwrap(), 180);
        assert_eq!(unpair(180), (9, 9));
    }

    #[test]
    fn colex_orders_pairs() {
        let s = BaseSpace::NSubsets { n: 2 };
        assert_eq!(s.decode(0), Point::Subset(vec![0, 1]));
        assert_eq!(s.decode(1), Point::Subset(vec![0, 2]));
        assert_eq!(s.decode(2), Point::Subset(vec![1, 2]));
        assert_eq!(s.decode(3), Point::Subset(vec![0, 3]));
    }

    #[test]
    fn round_trip_on_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let spaces = [
            BaseSpace::Omega,
            BaseSpace::OmegaSquared,
            BaseSpace::TwoCopies,
            BaseSpace::NSubsets { n: 2 },
            BaseSpace::NSubsets { n: 3 },
            BaseSpace::OmegaTimesOmega,
        ];
        for space in spaces {
            for _ in 0..10_000 {
                let code = rng.gen_range(0..1u64 << 40);
                let p = space.decode(code);
                assert_eq!(space.encode(&p).unwrap(), code, "{space} {code}");
            }
        }
    }

    #[test]
    fn mismatched_point_is_rejected() {
        assert!(BaseSpace::Omega.encode(&Point::Pair(1, 2)).is_err());
        assert!(BaseSpace::TwoCopies.encode(&Point::Pair(2, 0)).is_err());
    }
}
