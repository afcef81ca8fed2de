use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::weight::{block_value, WeightFn};
use crate::error::{Error, Result};
use crate::num::{self, from_uint, round_down, round_up, Rational, ENCLOSURE_BITS};
use crate::sets::eval::SCAN_CAP;
use crate::sets::SetExpr;

/// Terms summed exactly before switching to chunked monotone bounds.
pub const EXACT_TERMS: u64 = 2000;

/// Enclosure `[lower, upper]` of a partial sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBounds {
    #[serde(with = "num::serde_rational")]
    pub lower: Rational,
    #[serde(with = "num::serde_rational")]
    pub upper: Rational,
    pub exact: bool,
}

impl SeriesBounds {
    fn exact(v: Rational) -> Self {
        SeriesBounds { lower: v.clone(), upper: v, exact: true }
    }

    pub fn value(&self) -> Option<&Rational> {
        self.exact.then_some(&self.lower)
    }
}

/// Elements of `set` in `[lo, hi)`, for short ranges.
fn elements_in(set: &SetExpr, lo: u64, hi: u64) -> Result<Vec<u64>> {
    if hi <= SCAN_CAP {
        let w = set.window(hi)?;
        return Ok(w.elements.into_iter().filter(|&x| x >= lo).collect());
    }
    let f = set.member_fn(hi);
    let mut out = Vec::new();
    for x in lo..hi {
        if f(x)? {
            out.push(x);
        }
    }
    Ok(out)
}

/// `Σ_{k ∈ A ∩ [lo, hi)} w(k)`.
///
/// Per-block and constant weights are summed exactly from block counts.
/// Monotone weights are summed exactly over the first [`EXACT_TERMS`]
/// positions and then bounded chunk by chunk (chunks grow by 1/16 of their
/// start), with endpoints rounded outward to the enclosure grid.
pub fn sum_range(w: &WeightFn, set: &SetExpr, lo: u64, hi: u64) -> Result<SeriesBounds> {
    w.validate()?;
    if lo >= hi {
        return Ok(SeriesBounds::exact(Rational::zero()));
    }
    match w {
        WeightFn::Constant { value } => {
            let c = set.count_range(&BigUint::from(lo), &BigUint::from(hi))?;
            Ok(SeriesBounds::exact(value * from_uint(&c)))
        }
        WeightFn::PerBlock { schedule, value } => {
            let mut total = Rational::zero();
            let (lo_b, hi_b) = (BigUint::from(lo), BigUint::from(hi));
            let mut start = BigUint::zero();
            let mut n = 0u64;
            while start < hi_b {
                let end = &start + schedule.length(n);
                let a = start.clone().max(lo_b.clone());
                let b = end.clone().min(hi_b.clone());
                if a < b {
                    let c = set.count_range(&a, &b)?;
                    if !c.is_zero() {
                        total += block_value(schedule, value, n) * from_uint(&c);
                    }
                }
                start = end;
                n += 1;
            }
            Ok(SeriesBounds::exact(total))
        }
        _ => {
            let mut exact_end = hi.min(lo.saturating_add(EXACT_TERMS));
            let mut scan_end = exact_end;
            if let Some(b) = crate::sets::analysis::finite_bound(set) {
                if b <= exact_end {
                    (exact_end, scan_end) = (hi, b.max(lo));
                }
            }
            let mut sum = Rational::zero();
            for k in elements_in(set, lo, scan_end)? {
                sum += w.at(k)?;
            }
            if exact_end == hi {
                return Ok(SeriesBounds::exact(sum));
            }
            if let Some(tail) = w.tail_closed_form(exact_end) {
                // remaining terms are negligible; bound them all at once
                let upper = round_up(&(&sum + tail));
                return Ok(SeriesBounds { lower: round_down(&sum), upper, exact: false });
            }
            let mut lower = round_down(&sum);
            let mut upper = round_up(&sum);
            let mut a = exact_end;
            while a < hi {
                let b = hi.min(a.saturating_add((a / 16).max(1)));
                let c = set.count_range(&BigUint::from(a), &BigUint::from(b))?;
                if !c.is_zero() {
                    let c = from_uint(&c);
                    lower = round_down(&(lower + &c * w.at(b - 1)?));
                    upper = round_up(&(upper + &c * w.at(a)?));
                }
                a = b;
            }
            Ok(SeriesBounds { lower, upper, exact: false })
        }
    }
}

/// `Σ_{n ∈ A ∩ [0, N)} w(n)`.
pub fn summable_partial(w: &WeightFn, set: &SetExpr, bound: u64) -> Result<SeriesBounds> {
    set.space()?;
    sum_range(w, set, 0, bound)
}

/// `A_w[1, n] / ω_w[1, n]`, where positions `1..n` are the first `n`
/// naturals `0..n-1`; with `w ≡ 1` this is the window density at `n`.
pub fn eu_ratio(w: &WeightFn, set: &SetExpr, n: u64) -> Result<Rational> {
    set.space()?;
    let num = sum_range(w, set, 0, n)?;
    let den = sum_range(w, &SetExpr::all(), 0, n)?;
    let (Some(a), Some(b)) = (num.value(), den.value()) else {
        return Err(Error::EffortExceeded(format!("weights on [0, {n}) have no exact closed form at this size")));
    };
    if b.is_zero() {
        return Err(Error::DegenerateWeight(format!("total weight on the first {n} positions is zero")));
    }
    Ok(a / b)
}

/// Enclosure of the normalized ratio when exact sums are out of reach.
pub fn eu_ratio_bounds(w: &WeightFn, set: &SetExpr, n: u64) -> Result<(Rational, Rational)> {
    let num = sum_range(w, set, 0, n)?;
    let den = sum_range(w, &SetExpr::all(), 0, n)?;
    if den.lower.is_zero() {
        return Err(Error::DegenerateWeight(format!("total weight on the first {n} positions is zero")));
    }
    Ok((&num.lower / &den.upper, (&num.upper / &den.lower).min(Rational::one())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelDiniPoint {
    pub n: u64,
    #[serde(with = "num::serde_rational")]
    pub lower: Rational,
    #[serde(with = "num::serde_rational")]
    pub upper: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelDiniReport {
    pub terms: u64,
    #[serde(with = "num::serde_rational")]
    pub delta: Rational,
    pub exact: bool,
    pub checkpoints: Vec<AbelDiniPoint>,
    #[serde(with = "num::serde_rational")]
    pub lower: Rational,
    #[serde(with = "num::serde_rational")]
    pub upper: Rational,
    /// `(1 + 1/δ) · x_1^{-δ}` bounds the whole series when `δ > 0`.
    #[serde(with = "num::serde_rational_opt")]
    pub cap: Option<Rational>,
    pub below_cap: Option<bool>,
    /// Last term at most the term at the previous checkpoint.
    pub increments_shrinking: bool,
    /// `s_N ≥ 2 · s_{N/1024}`: the base series keeps growing.
    pub divergence_evidence: bool,
    #[serde(with = "num::serde_rational")]
    pub base_sum_lower: Rational,
}

fn checkpoint_positions(n: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = (0..20).map(|k| 10u64.pow(k)).take_while(|&c| c < n).collect();
    cps.push(n);
    cps
}

/// Partial sums of `Σ x_n / s_n^{1+δ}` for `n = 1..=N`, `s_n = x_1 + … + x_n`.
///
/// Small integer-exponent cases are summed exactly; otherwise the sum is
/// carried as a fixed-point enclosure with `ENCLOSURE_BITS` fractional bits.
pub fn abel_dini(x: &WeightFn, delta: &Rational, terms: u64) -> Result<AbelDiniReport> {
    x.validate()?;
    if delta.is_negative() {
        return Err(Error::Precondition("delta must be nonnegative".into()));
    }
    if terms == 0 {
        return Err(Error::Precondition("at least one term is needed".into()));
    }
    let p = delta.numer().to_u32().ok_or_else(|| Error::Precondition("delta numerator too large".into()))?;
    let q = delta.denom().to_u32().ok_or_else(|| Error::Precondition("delta denominator too large".into()))?;
    let x1 = x.at(1)?;
    if !x1.is_positive() {
        return Err(Error::NonPositiveTerm(1));
    }
    let cps = checkpoint_positions(terms);
    let mut points = Vec::new();
    let mut last_terms: Vec<Rational> = Vec::new();
    let exact = q == 1 && terms <= EXACT_TERMS;
    let (lower, upper, s_final, s_early);
    if exact {
        let mut s = Rational::zero();
        let mut total = Rational::zero();
        let mut early = Rational::zero();
        let mut next_cp = 0;
        for n in 1..=terms {
            let xn = x.at(n)?;
            if !xn.is_positive() {
                return Err(Error::NonPositiveTerm(n));
            }
            s += &xn;
            let term = &xn / num_traits::pow(s.clone(), 1 + p as usize);
            total += &term;
            if n == (terms / 1024).max(1) {
                early = s.clone();
            }
            if n == cps[next_cp] {
                points.push(AbelDiniPoint { n, lower: total.clone(), upper: total.clone() });
                last_terms.push(term);
                next_cp += 1;
            }
        }
        lower = total.clone();
        upper = total;
        s_final = s;
        s_early = early;
    } else {
        let bits = ENCLOSURE_BITS;
        let scale = BigUint::one() << bits;
        let to_fixed = |r: &Rational, up: bool| -> BigUint {
            let v = (r.numer() << bits as usize).to_biguint().unwrap_or_default();
            let d = r.denom().to_biguint().expect("positive denominator");
            if up {
                v.div_ceil(&d)
            } else {
                v / d
            }
        };
        let (mut s_lo, mut s_hi) = (BigUint::zero(), BigUint::zero());
        let (mut t_lo, mut t_hi) = (BigUint::zero(), BigUint::zero());
        let mut early = BigUint::zero();
        let mut next_cp = 0;
        let constant = match x {
            WeightFn::Constant { value } => Some((to_fixed(value, false), to_fixed(value, true))),
            _ => None,
        };
        for n in 1..=terms {
            let (x_lo, x_hi) = match (&constant, x) {
                (Some(c), _) => c.clone(),
                (None, WeightFn::Reciprocal { shift }) => {
                    let d = BigUint::from(n + shift);
                    (&scale / &d, scale.div_ceil(&d))
                }
                _ => {
                    let xn = x.at(n)?;
                    if !xn.is_positive() {
                        return Err(Error::NonPositiveTerm(n));
                    }
                    (to_fixed(&xn, false), to_fixed(&xn, true))
                }
            };
            s_lo += &x_lo;
            s_hi += &x_hi;
            if s_lo.is_zero() {
                return Err(Error::NonPositiveTerm(n));
            }
            // s^{1+δ} at scale 2^bits: (S^{q+p} / 2^{bits·p})^{1/q}
            let pw_lo = {
                let v = num_traits::pow(s_lo.clone(), (q + p) as usize) >> (bits as usize * p as usize);
                if q == 1 {
                    v
                } else {
                    v.nth_root(q)
                }
            };
            let pw_hi = {
                let full = num_traits::pow(s_hi.clone(), (q + p) as usize);
                let v = full.div_ceil(&(BigUint::one() << (bits as usize * p as usize)));
                if q == 1 {
                    v
                } else {
                    v.nth_root(q) + 1u8
                }
            };
            let term_lo = (&x_lo << bits as usize) / &pw_hi;
            let term_hi = (&x_hi << bits as usize).div_ceil(&pw_lo.max(BigUint::one()));
            t_lo += &term_lo;
            t_hi += &term_hi;
            if n == (terms / 1024).max(1) {
                early = s_lo.clone();
            }
            if n == cps[next_cp] {
                points.push(AbelDiniPoint { n, lower: fixed_to_rational(&t_lo, bits), upper: fixed_to_rational(&t_hi, bits) });
                last_terms.push(fixed_to_rational(&term_hi, bits));
                next_cp += 1;
            }
        }
        lower = fixed_to_rational(&t_lo, bits);
        upper = fixed_to_rational(&t_hi, bits);
        s_final = fixed_to_rational(&s_lo, bits);
        s_early = fixed_to_rational(&early, bits);
    }
    let cap = if p > 0 && q == 1 {
        let xd = num_traits::pow(x1.clone(), p as usize);
        Some((Rational::one() + Rational::one() / delta) / xd)
    } else {
        None
    };
    let below_cap = cap.as_ref().map(|c| &upper < c);
    let increments_shrinking = last_terms.windows(2).all(|w| w[1] <= w[0]);
    let divergence_evidence = terms >= 1024 && s_final >= Rational::from_integer(BigInt::from(2)) * &s_early;
    Ok(AbelDiniReport {
        terms,
        delta: delta.clone(),
        exact,
        checkpoints: points,
        lower,
        upper,
        cap,
        below_cap,
        increments_shrinking,
        divergence_evidence,
        base_sum_lower: s_final,
    })
}

fn fixed_to_rational(v: &BigUint, bits: u64) -> Rational {
    Rational::new(BigInt::from(v.clone()), BigInt::one() << bits as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    #[test]
    fn geometric_partials_stay_below_two() {
        let w = WeightFn::geometric(2);
        for n in [1u64, 10, 100, 5000] {
            let s = summable_partial(&w, &SetExpr::all(), n).unwrap();
            assert!(s.lower < rat(2, 1) && s.upper <= rat(2, 1), "{n}");
            if n <= EXACT_TERMS {
                assert!(s.exact && s.upper < rat(2, 1));
            }
        }
    }

    #[test]
    fn harmonic_over_evens_passes_ten_by_two_to_the_forty() {
        let s = summable_partial(&WeightFn::reciprocal(1), &SetExpr::evens(), 1 << 40).unwrap();
        assert!(s.lower > rat(10, 1));
        assert!(s.upper < rat(15, 1));
    }

    #[test]
    fn finite_sets_sum_exactly() {
        let s = summable_partial(&WeightFn::reciprocal(1), &SetExpr::explicit([0, 1, 3]), 1 << 30).unwrap();
        assert!(s.exact);
        assert_eq!(s.lower, rat(1, 1) + rat(1, 2) + rat(1, 4));
    }

    #[test]
    fn unit_weights_reproduce_density() {
        for n in [1u64, 7, 100, 1000] {
            let r = eu_ratio(&WeightFn::ones(), &SetExpr::evens(), n).unwrap();
            assert_eq!(r, crate::measures::density_window(&SetExpr::evens(), n).unwrap().ratio);
        }
        assert!(matches!(eu_ratio(&WeightFn::ones(), &SetExpr::evens(), 0), Err(Error::DegenerateWeight(_))));
    }

    #[test]
    fn abel_dini_squares_stay_below_two() {
        let r = abel_dini(&WeightFn::ones(), &rat(1, 1), 3000).unwrap();
        assert!(!r.exact);
        assert!(r.upper < rat(2, 1));
        assert_eq!(r.below_cap, Some(true));
        let small = abel_dini(&WeightFn::ones(), &rat(1, 1), 100).unwrap();
        assert!(small.exact);
        assert!(small.lower < rat(2, 1));
    }

    #[test]
    fn harmonic_control_passes_five() {
        let r = abel_dini(&WeightFn::ones(), &Rational::zero(), 150).unwrap();
        assert!(r.lower > rat(5, 1));
        assert!(r.cap.is_none());
    }

    #[test]
    fn fractional_delta_is_enclosed() {
        let r = abel_dini(&WeightFn::ones(), &rat(1, 2), 500).unwrap();
        assert!(r.lower <= r.upper);
        assert!(&r.upper - &r.lower < rat(1, 1_000_000));
    }

    #[test]
    fn nonpositive_terms_are_rejected() {
        let w = WeightFn::constant(Rational::zero());
        assert!(matches!(abel_dini(&w, &rat(1, 1), 10), Err(Error::NonPositiveTerm(1))));
    }
}
