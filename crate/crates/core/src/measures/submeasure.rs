use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::series::sum_range;
use super::weight::WeightFn;
use crate::error::{Error, Result};
use crate::num::{self, from_uint, rat_big, Rational};
use crate::sets::analysis::finite_bound;
use crate::sets::{BlockRule, CountFn, GridSchedule, InjectionExpr, SetExpr};

/// Lower semicontinuous submeasures on ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubmeasureExpr {
    /// `φ(A) = Σ_{n ∈ A} w(n)`
    SummableWeights { weight: WeightFn },
    /// `φ(A) = sup_n A_w[0, n) / ω_w[0, n)`
    EuNormalized { weight: WeightFn },
    /// `φ(A) = sup_n |A ∩ I_n| / |I_n|`
    FarahSup { schedule: GridSchedule },
}

impl SubmeasureExpr {
    pub fn validate(&self) -> Result<()> {
        match self {
            SubmeasureExpr::SummableWeights { weight } | SubmeasureExpr::EuNormalized { weight } => weight.validate(),
            SubmeasureExpr::FarahSup { schedule } => schedule.validate(),
        }
    }

    /// `φ(A)` for a finite set, exactly.
    pub fn of_finite(&self, elements: &[u64]) -> Result<Rational> {
        self.validate()?;
        let set: BTreeSet<u64> = elements.iter().copied().collect();
        let Some(&max) = set.iter().next_back() else { return Ok(Rational::zero()) };
        match self {
            SubmeasureExpr::SummableWeights { weight } => {
                let mut total = Rational::zero();
                for &k in &set {
                    total += weight.at(k)?;
                }
                Ok(total)
            }
            SubmeasureExpr::EuNormalized { weight } => {
                // past max A the numerator is frozen, so the sup is attained by max A + 1
                let (mut a, mut all) = (Rational::zero(), Rational::zero());
                let mut best = Rational::zero();
                for k in 0..=max {
                    let wk = weight.at(k)?;
                    if set.contains(&k) {
                        a += &wk;
                    }
                    all += wk;
                    if !all.is_zero() && set.contains(&k) {
                        let r = &a / &all;
                        if r > best {
                            best = r;
                        }
                    }
                }
                Ok(best)
            }
            SubmeasureExpr::FarahSup { schedule } => {
                let mut best = Rational::zero();
                let mut it = set.iter().peekable();
                while let Some(&x) = it.next() {
                    let pos = schedule.locate(x);
                    let end = pos.end_exclusive();
                    let mut count = 1u64;
                    while let Some(&&y) = it.peek() {
                        if BigUint::from(y) < end {
                            count += 1;
                            it.next();
                        } else {
                            break;
                        }
                    }
                    let r = rat_big(&BigUint::from(count), &pos.len);
                    if r > best {
                        best = r;
                    }
                }
                Ok(best)
            }
        }
    }
}

/// `φ_n(A) = |A ∩ I_n| / |I_n|`.
pub fn farah_block_measure(schedule: &GridSchedule, set: &SetExpr, n: u64) -> Result<Rational> {
    schedule.validate()?;
    set.space()?;
    let lo = schedule.offset(n);
    let len = schedule.length(n);
    let hi = &lo + &len;
    let c = set.count_range(&lo, &hi)?;
    Ok(rat_big(&c, &len))
}

/// Estimate of `φ(A ∩ [cut, ∞))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub cut: u64,
    /// Value on `A ∩ [cut, cut + window)`; never decreases as the window grows.
    #[serde(with = "num::serde_rational")]
    pub lower: Rational,
    #[serde(with = "num::serde_rational_opt")]
    pub upper: Option<Rational>,
    pub window: u64,
}

/// Blocks examined past the cut for Farah tails.
const FARAH_TAIL_BLOCKS: u64 = 24;

pub fn exh_tail(phi: &SubmeasureExpr, set: &SetExpr, cut: u64, window: u64) -> Result<TailEstimate> {
    phi.validate()?;
    set.space()?;
    if let Some(b) = finite_bound(set) {
        if b <= cut {
            return Ok(TailEstimate { cut, lower: Rational::zero(), upper: Some(Rational::zero()), window });
        }
    }
    let end = cut.saturating_add(window);
    match phi {
        SubmeasureExpr::SummableWeights { weight } => {
            let part = sum_range(weight, set, cut, end)?;
            let upper = match finite_bound(set) {
                Some(b) if b <= end => Some(part.upper.clone()),
                _ => weight.tail_closed_form(cut),
            };
            Ok(TailEstimate { cut, lower: part.lower, upper, window })
        }
        SubmeasureExpr::EuNormalized { weight } => {
            let tail = SetExpr::difference(set.clone(), SetExpr::explicit(0..cut.min(1 << 20)));
            let probe: Vec<u64> = tail.window(end)?.elements;
            let lower = SubmeasureExpr::EuNormalized { weight: weight.clone() }.of_finite(&probe)?;
            let upper = match finite_bound(set) {
                Some(b) if b <= end => Some(lower.clone()),
                _ => None,
            };
            Ok(TailEstimate { cut, lower, upper, window })
        }
        SubmeasureExpr::FarahSup { schedule } => {
            let first = schedule.locate(cut).index;
            let cut_big = BigUint::from(cut);
            let mut lower = Rational::zero();
            let mut examined = first;
            for n in first..first + FARAH_TAIL_BLOCKS {
                if matches!(schedule, GridSchedule::TwoPowFactorial) && n > 12 {
                    break;
                }
                let lo = schedule.offset(n).max(cut_big.clone());
                let len = schedule.length(n);
                let hi = schedule.offset(n) + &len;
                let c = match set.count_range(&lo, &hi) {
                    Ok(c) => c,
                    Err(e) if e.is_effort() => break,
                    Err(e) => return Err(e),
                };
                let r = rat_big(&c, &len);
                if r > lower {
                    lower = r;
                }
                examined = n + 1;
            }
            let upper = farah_tail_upper(schedule, set, examined).map(|u| if u > lower { u } else { lower.clone() });
            Ok(TailEstimate { cut, lower, upper, window })
        }
    }
}

/// A constant per-block count `c` over nondecreasing lengths gives
/// `φ_n ≤ c / |I_m|` for every `n ≥ m`.
fn farah_tail_upper(schedule: &GridSchedule, set: &SetExpr, from: u64) -> Option<Rational> {
    let SetExpr::BlockRule { schedule: s, rule, .. } = set else { return None };
    if s != schedule {
        return None;
    }
    let c = match rule {
        BlockRule::Nothing => return Some(Rational::zero()),
        BlockRule::First { count: CountFn::Const { value } } | BlockRule::Last { count: CountFn::Const { value } } => *value,
        _ => return None,
    };
    let nondecreasing = match schedule {
        GridSchedule::Factorial | GridSchedule::TwoPowFactorial | GridSchedule::Dyadic | GridSchedule::DyadicKn => {
            from >= 1
        }
        GridSchedule::Custom { lengths } => {
            let tail = &lengths[(from as usize).min(lengths.len() - 1)..];
            tail.windows(2).all(|w| w[0] <= w[1])
        }
    };
    nondecreasing.then(|| {
        let len = schedule.length(from);
        Rational::from(num_bigint::BigInt::from(c)) / from_uint(&len)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceSample {
    pub set: Vec<u64>,
    pub image: Vec<u64>,
    #[serde(with = "num::serde_rational")]
    pub phi_set: Rational,
    #[serde(with = "num::serde_rational")]
    pub phi_image: Rational,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinExhCheck {
    #[serde(with = "num::serde_rational")]
    pub c: Rational,
    pub bound: u64,
    pub samples: usize,
    pub holds: bool,
    pub counterexample: Option<InvarianceSample>,
}

/// Checks `φ(A) ≥ c · φ(f[A])` on finite samples `A ⊆ [0, N)`.
pub fn finexh_invariance_check(
    phi: &SubmeasureExpr,
    f: &InjectionExpr,
    c: &Rational,
    family: &[Vec<u64>],
    bound: u64,
) -> Result<FinExhCheck> {
    if c <= &Rational::zero() {
        return Err(Error::Precondition("c must be positive".into()));
    }
    f.check_increasing(bound, bound.max(1 << 10))?;
    let ev = f.evaluator(bound.max(1 << 10))?;
    let mut counterexample = None;
    for a in family {
        let mut set: Vec<u64> = a.iter().copied().filter(|&x| x < bound).collect();
        set.sort_unstable();
        set.dedup();
        let mut image = Vec::with_capacity(set.len());
        for &x in &set {
            let y = ev.apply(x)?.ok_or_else(|| Error::EffortExceeded(format!("f({x}) unavailable")))?;
            image.push(y);
        }
        let phi_set = phi.of_finite(&set)?;
        let phi_image = phi.of_finite(&image)?;
        let holds = phi_set >= c * &phi_image;
        if !holds {
            counterexample = Some(InvarianceSample { set, image, phi_set, phi_image, holds });
            break;
        }
    }
    Ok(FinExhCheck { c: c.clone(), bound, samples: family.len(), holds: counterexample.is_none(), counterexample })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, rat_u};
    use num_traits::ToPrimitive;

    #[test]
    fn farah_blocks() {
        let s = GridSchedule::Factorial;
        let i5 = SetExpr::block_rule_on(s.clone(), BlockRule::All, SetExpr::explicit([5]));
        assert_eq!(farah_block_measure(&s, &i5, 5).unwrap(), rat(1, 1));
        assert_eq!(farah_block_measure(&s, &i5, 4).unwrap(), rat(0, 1));
        let half = SetExpr::block_rule(s.clone(), BlockRule::First { count: CountFn::Fraction { num: 1, den: 2 } });
        assert_eq!(farah_block_measure(&s, &half, 6).unwrap(), rat(1, 2));
        assert_eq!(farah_block_measure(&s, &SetExpr::empty(), 3).unwrap(), rat(0, 1));
    }

    #[test]
    fn geometric_tail_bounds() {
        let phi = SubmeasureExpr::SummableWeights { weight: WeightFn::geometric(2) };
        let t = exh_tail(&phi, &SetExpr::all(), 10, 1000).unwrap();
        assert!(t.lower >= rat_u(1, 1024));
        assert_eq!(t.upper, Some(rat_u(1, 512)));
    }

    #[test]
    fn farah_tail_of_block_maxima() {
        let s = GridSchedule::Factorial;
        let maxima = SetExpr::block_rule(s.clone(), BlockRule::Last { count: CountFn::Const { value: 1 } });
        let cut = s.offset(4).to_u64().unwrap();
        let t = exh_tail(&SubmeasureExpr::FarahSup { schedule: s }, &maxima, cut, 1 << 20).unwrap();
        assert_eq!(t.lower, rat(1, 24));
        assert_eq!(t.upper, Some(rat(1, 24)));
    }

    #[test]
    fn finite_tail_is_zero() {
        let phi = SubmeasureExpr::SummableWeights { weight: WeightFn::reciprocal(1) };
        let t = exh_tail(&phi, &SetExpr::explicit([1, 5, 9]), 10, 100).unwrap();
        assert_eq!(t.upper, Some(Rational::zero()));
    }

    #[test]
    fn finexh_examples() {
        let family: Vec<Vec<u64>> = vec![vec![], vec![0], vec![1, 2, 3], (0..50).step_by(3).collect(), vec![7, 40, 41]];
        let density = SubmeasureExpr::EuNormalized { weight: WeightFn::ones() };
        let r = finexh_invariance_check(&density, &InjectionExpr::affine(2, 0), &rat(1, 2), &family, 64).unwrap();
        assert!(r.holds);
        let r = finexh_invariance_check(&density, &InjectionExpr::Identity, &rat(1, 1), &family, 64).unwrap();
        assert!(r.holds);
        let geo = SubmeasureExpr::SummableWeights { weight: WeightFn::geometric(2) };
        let r = finexh_invariance_check(&geo, &InjectionExpr::shift(1), &rat(1, 2), &family, 64).unwrap();
        assert!(r.holds);
        // φ(A) ≥ 3 φ(A) fails on any nonempty sample
        let r = finexh_invariance_check(&geo, &InjectionExpr::Identity, &rat(3, 1), &family, 64).unwrap();
        assert!(!r.holds);
    }

    #[test]
    fn density_sup_form() {
        let phi = SubmeasureExpr::EuNormalized { weight: WeightFn::ones() };
        assert_eq!(phi.of_finite(&[0]).unwrap(), rat(1, 1));
        assert_eq!(phi.of_finite(&[1, 3]).unwrap(), rat(1, 2));
    }
}
