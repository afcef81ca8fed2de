use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{factorial, pow2};

/// A partition of ω into consecutive nonempty intervals `I_0, I_1, …`.
///
/// Offsets and lengths are exact big integers; `(2^n)!` overflows every
/// fixed width from `n = 5` on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSchedule {
    /// `|I_n| = n!`
    Factorial,
    /// `|I_n| = (2^n)!`
    TwoPowFactorial,
    /// `I_0 = {0}`, `I_n = [2^{k_n}, 2^{k_{n+1}})` for `n ≥ 1`, with `k_n` from [`kn`].
    DyadicKn,
    /// `I_0 = {0}`, `I_n = [2^{n-1}, 2^n)` for `n ≥ 1`.
    Dyadic,
    /// Explicit lengths; the last length repeats forever.
    Custom { lengths: Vec<u64> },
}

/// `k_0 = 0`, `k_n = min { x : 2^x ≥ n · 2^{k_{n-1}} }`.
pub fn kn(n: u64) -> u64 {
    let mut k = 0u64;
    for m in 1..=n {
        // smallest x with 2^x >= m * 2^k, i.e. x = k + ceil(log2 m)
        k += ceil_log2(m);
    }
    k
}

pub fn ceil_log2(m: u64) -> u64 {
    if m <= 1 {
        0
    } else {
        64 - (m - 1).leading_zeros() as u64
    }
}

/// Position of an element inside a schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPos {
    pub index: u64,
    pub start: u64,
    pub len: BigUint,
}

impl BlockPos {
    pub fn end_exclusive(&self) -> BigUint {
        BigUint::from(self.start) + &self.len
    }
}

impl GridSchedule {
    pub fn validate(&self) -> Result<()> {
        if let GridSchedule::Custom { lengths } = self {
            if lengths.is_empty() || lengths.iter().any(|&l| l == 0) {
                return Err(Error::Malformed("custom schedule needs nonempty positive lengths".into()));
            }
        }
        Ok(())
    }

    pub fn length(&self, n: u64) -> BigUint {
        match self {
            GridSchedule::Factorial => factorial(n),
            GridSchedule::TwoPowFactorial => {
                assert!(n < 20, "(2^{n})! is beyond desk scale");
                factorial(1u64 << n)
            }
            GridSchedule::DyadicKn => {
                if n == 0 {
                    BigUint::from(1u8)
                } else {
                    pow2(kn(n + 1)) - pow2(kn(n))
                }
            }
            GridSchedule::Dyadic => {
                if n == 0 {
                    BigUint::from(1u8)
                } else {
                    pow2(n - 1)
                }
            }
            GridSchedule::Custom { lengths } => {
                BigUint::from(*lengths.get(n as usize).unwrap_or_else(|| lengths.last().expect("validated")))
            }
        }
    }

    /// `min I_n`.
    pub fn offset(&self, n: u64) -> BigUint {
        match self {
            GridSchedule::DyadicKn => {
                if n == 0 {
                    BigUint::zero()
                } else {
                    pow2(kn(n))
                }
            }
            GridSchedule::Dyadic => {
                if n == 0 {
                    BigUint::zero()
                } else {
                    pow2(n - 1)
                }
            }
            GridSchedule::Custom { lengths } => {
                let known = lengths.len() as u64;
                if n <= known {
                    BigUint::from(lengths[..n as usize].iter().map(|&l| l as u128).sum::<u128>())
                } else {
                    let head: u128 = lengths.iter().map(|&l| l as u128).sum();
                    let last = *lengths.last().expect("validated") as u128;
                    BigUint::from(head) + BigUint::from(last) * BigUint::from(n - known)
                }
            }
            _ => (0..n).map(|m| self.length(m)).sum(),
        }
    }

    pub fn max_of(&self, n: u64) -> BigUint {
        self.offset(n + 1) - 1u8
    }

    /// Finds the interval containing `x`.
    pub fn locate(&self, x: u64) -> BlockPos {
        if let GridSchedule::Custom { lengths } = self {
            let head: u64 = lengths.iter().sum();
            if x >= head {
                let last = *lengths.last().expect("validated");
                let idx = lengths.len() as u64 + (x - head) / last;
                let start = head + (x - head) / last * last;
                return BlockPos { index: idx, start, len: BigUint::from(last) };
            }
        }
        let target = BigUint::from(x);
        let mut n = 0u64;
        let mut start = BigUint::zero();
        loop {
            let len = self.length(n);
            let end = &start + &len;
            if target < end {
                return BlockPos { index: n, start: start.to_u64().expect("start <= x"), len };
            }
            start = end;
            n += 1;
        }
    }

    /// Blocks meeting `[0, bound)`, each clipped to the window.
    pub fn blocks_below(&self, bound: u64) -> Vec<(u64, u64, u64)> {
        let mut out = Vec::new();
        if bound == 0 {
            return out;
        }
        let mut n = 0u64;
        let mut start = 0u64;
        while start < bound {
            let len = self.length(n);
            let end_big = BigUint::from(start) + &len;
            let end = end_big.to_u64().map_or(bound, |e| e.min(bound));
            out.push((n, start, end));
            start = end_big.to_u64().unwrap_or(u64::MAX);
            n += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kn_recursion_matches_definition() {
        assert_eq!(kn(0), 0);
        assert_eq!(kn(1), 0);
        assert_eq!(kn(2), 1);
        assert_eq!(kn(3), 3);
        assert_eq!(kn(4), 5);
        for n in 1..=40u64 {
            let (prev, cur) = (kn(n - 1), kn(n));
            // 2^{k_n} >= n 2^{k_{n-1}} and k_n is minimal
            assert!(pow2(cur) >= BigUint::from(n) * pow2(prev));
            if cur > 0 {
                assert!(pow2(cur - 1) < BigUint::from(n) * pow2(prev));
            }
        }
    }

    #[test]
    fn factorial_offsets() {
        let s = GridSchedule::Factorial;
        let offs: Vec<u64> = (0..6).map(|n| s.offset(n).to_u64().unwrap()).collect();
        assert_eq!(offs, vec![0, 1, 2, 4, 10, 34]);
        assert_eq!(s.locate(5), BlockPos { index: 3, start: 4, len: BigUint::from(6u8) });
    }

    #[test]
    fn two_pow_factorial_offsets() {
        let s = GridSchedule::TwoPowFactorial;
        assert_eq!(s.offset(4), BigUint::from(40347u32));
        assert_eq!(s.max_of(3), BigUint::from(40346u32));
    }

    #[test]
    fn intervals_partition_a_prefix() {
        for s in [
            GridSchedule::Factorial,
            GridSchedule::DyadicKn,
            GridSchedule::Dyadic,
            GridSchedule::Custom { lengths: vec![3, 1, 2] },
        ] {
            let mut expected_start = 0;
            for (n, start, end) in s.blocks_below(500) {
                assert_eq!(start, expected_start);
                assert!(end > start);
                for x in start..end {
                    assert_eq!(s.locate(x).index, n);
                }
                expected_start = end;
            }
            assert_eq!(expected_start, 500);
        }
    }

    #[test]
    fn custom_schedule_must_be_positive() {
        assert!(GridSchedule::Custom { lengths: vec![] }.validate().is_err());
        assert!(GridSchedule::Custom { lengths: vec![1, 0] }.validate().is_err());
    }
}
