use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{self, from_uint, pow2, Rational};
use crate::sets::{kn, GridSchedule};

/// Nonnegative weight `w: ω → Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightFn {
    Constant {
        #[serde(with = "num::serde_rational")]
        value: Rational,
    },
    /// `1/(n + shift)`
    Reciprocal {
        #[serde(default = "one")]
        shift: u64,
    },
    /// `1/(n + shift)^exp`
    ReciprocalPower {
        exp: u32,
        #[serde(default = "one")]
        shift: u64,
    },
    /// `base^-n`
    Geometric { base: u64 },
    /// Constant on each interval of the schedule.
    PerBlock { schedule: GridSchedule, value: BlockValue },
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "of", rename_all = "kebab-case")]
pub enum BlockValue {
    /// `|I_n|`
    BlockLength,
    /// `1/|I_n|`
    InverseLength,
    /// `2^{k_n}`
    Pow2Kn,
    /// Explicit values; the last one repeats.
    Table {
        #[serde(with = "crate::num::rational_vec")]
        values: Vec<Rational>,
    },
}

impl WeightFn {
    pub fn constant(value: Rational) -> Self {
        WeightFn::Constant { value }
    }
    pub fn ones() -> Self {
        WeightFn::Constant { value: Rational::one() }
    }
    pub fn reciprocal(shift: u64) -> Self {
        WeightFn::Reciprocal { shift }
    }
    pub fn geometric(base: u64) -> Self {
        WeightFn::Geometric { base }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightFn::Constant { value } if value.is_negative() => {
                Err(Error::DegenerateWeight(format!("negative constant weight {}", num::fmt_rational(value))))
            }
            WeightFn::Geometric { base } if *base < 2 => Err(Error::DegenerateWeight("geometric weights need base >= 2".into())),
            WeightFn::PerBlock { schedule, value } => {
                schedule.validate()?;
                if let BlockValue::Table { values } = value {
                    if values.is_empty() || values.iter().any(|v| v.is_negative()) {
                        return Err(Error::DegenerateWeight("block table needs nonnegative values".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `w(n)`; `NonPositiveTerm` where the formula is undefined.
    pub fn at(&self, n: u64) -> Result<Rational> {
        Ok(match self {
            WeightFn::Constant { value } => value.clone(),
            WeightFn::Reciprocal { shift } => {
                let d = n + shift;
                if d == 0 {
                    return Err(Error::NonPositiveTerm(n));
                }
                num::rat_u(1, d)
            }
            WeightFn::ReciprocalPower { exp, shift } => {
                let d = n + shift;
                if d == 0 {
                    return Err(Error::NonPositiveTerm(n));
                }
                Rational::new(BigInt::one(), num_traits::pow(BigInt::from(d), *exp as usize))
            }
            WeightFn::Geometric { base } => {
                Rational::new(BigInt::one(), num_traits::pow(BigInt::from(*base), n as usize))
            }
            WeightFn::PerBlock { schedule, value } => block_value(schedule, value, schedule.locate(n).index),
        })
    }

    /// True when `w` never increases, so chunk endpoints bound chunk sums.
    pub fn is_nonincreasing(&self) -> bool {
        !matches!(self, WeightFn::PerBlock { .. })
    }

    /// Closed form of `Σ_{k ≥ cut} w(k)` when the total converges and has one.
    pub fn tail_closed_form(&self, cut: u64) -> Option<Rational> {
        match self {
            WeightFn::Geometric { base } => {
                let b = Rational::from_integer(BigInt::from(*base));
                Some(Rational::one() / num_traits::pow(b.clone(), cut as usize) * &b / (b - Rational::one()))
            }
            _ => None,
        }
    }
}

pub fn block_value(schedule: &GridSchedule, value: &BlockValue, n: u64) -> Rational {
    match value {
        BlockValue::BlockLength => from_uint(&schedule.length(n)),
        BlockValue::InverseLength => Rational::one() / from_uint(&schedule.length(n)),
        BlockValue::Pow2Kn => from_uint(&pow2(kn(n))),
        BlockValue::Table { values } => values.get(n as usize).unwrap_or_else(|| values.last().expect("validated")).clone(),
    }
}

/// `Σ_{k ∈ [lo, hi)} w(k)` over all of ω, exact, for per-block weights.
pub fn block_total(schedule: &GridSchedule, value: &BlockValue, lo: &BigUint, hi: &BigUint) -> Rational {
    let mut total = Rational::zero();
    let mut start = BigUint::zero();
    let mut n = 0u64;
    while &start < hi {
        let end = &start + schedule.length(n);
        let a = start.clone().max(lo.clone());
        let b = end.clone().min(hi.clone());
        if a < b {
            total += block_value(schedule, value, n) * from_uint(&(b - a));
        }
        start = end;
        n += 1;
    }
    total
}
