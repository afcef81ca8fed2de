//! Structural facts about set expressions that windows alone cannot give:
//! finiteness, known densities, AP-length bounds, and the cross-check of
//! analytic annotations against window statistics.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::expr::{BlockRule, CountFn, SetExpr};
use super::injection::InjectionExpr;
use super::space::unpair;
use crate::error::{Error, Result};
use crate::num::{self, rat_u, Rational};

/// A fact together with the reason it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Known<T> {
    pub value: T,
    pub reason: String,
}

fn known<T>(value: T, reason: impl Into<String>) -> Option<Known<T>> {
    Some(Known { value, reason: reason.into() })
}

/// An exclusive upper bound on the elements when the set is finite by construction.
pub fn finite_bound(expr: &SetExpr) -> Option<u64> {
    use SetExpr::*;
    match expr {
        Empty { .. } => Some(0),
        Explicit { elements, .. } => Some(elements.iter().max().map_or(0, |m| m + 1)),
        Points { points, space } => {
            let mut m = 0;
            for p in points {
                m = m.max(space.encode(p).ok()? + 1);
            }
            Some(m)
        }
        FsSet { generators } => {
            let mut g = generators.clone();
            g.sort_unstable();
            g.dedup();
            g.iter().try_fold(1u64, |acc, &x| acc.checked_add(x))
        }
        GridCopy { v, alpha, side } => {
            let i = v[0].checked_add(alpha.checked_mul(*side)?)?;
            let j = v[1].checked_add(alpha.checked_mul(*side)?)?;
            super::space::pair(i + j, i + j).ok().map(|p| p + 1)
        }
        BlockRule { rule: self::BlockRule::Nothing, .. } => Some(0),
        BlockRule { rule: self::BlockRule::First { count: CountFn::Table { counts } }, schedule, blocks: None }
        | BlockRule { rule: self::BlockRule::Last { count: CountFn::Table { counts } }, schedule, blocks: None } => {
            let last = counts.iter().rposition(|&c| c > 0);
            match last {
                None => Some(0),
                Some(n) => num::to_u64(&schedule.offset(n as u64 + 1)),
            }
        }
        Union { of } => of.iter().map(finite_bound).try_fold(0u64, |acc, b| b.map(|b| acc.max(b))),
        Intersection { of } => of.iter().filter_map(finite_bound).min(),
        Difference { left, .. } => finite_bound(left),
        Section { at, set } => section_bound(*at, set),
        Tagged { copy, set } => finite_bound(set).map(|b| if b == 0 { 0 } else { 2 * (b - 1) + copy + 1 }),
        Rectangle { rows, cols } => {
            let (r, c) = (finite_bound(rows)?, finite_bound(cols)?);
            if r == 0 || c == 0 {
                Some(0)
            } else {
                super::space::pair(r + c, r + c).ok()
            }
        }
        Subsets { n, set } => {
            let b = finite_bound(set)?;
            if b < *n as u64 {
                Some(0)
            } else {
                let top: Vec<u64> = ((b - *n as u64)..b).collect();
                super::space::BaseSpace::NSubsets { n: *n }
                    .encode(&super::space::Point::Subset(top))
                    .ok()
                    .map(|c| c + 1)
            }
        }
        Image { map, set } => {
            let b = finite_bound(set)?;
            let ev = map.evaluator(b.max(64)).ok()?;
            let mut m = 0;
            for x in 0..b {
                if set.contains(x).ok()? {
                    m = m.max(ev.apply(x).ok()?? + 1);
                }
            }
            Some(m)
        }
        Annotated { set, .. } => finite_bound(set),
        _ => None,
    }
}

/// Exclusive bound on the section `{y : (at, y) ∈ set}` when it is finite by construction.
pub fn section_bound(at: u64, set: &SetExpr) -> Option<u64> {
    use SetExpr::*;
    match set {
        Empty { .. } => Some(0),
        LowerTriangle => Some(at + 1),
        GridCopy { v, alpha, side } => {
            let on_row = at > v[0] && *alpha > 0 && (at - v[0]) % alpha == 0 && (at - v[0]) / alpha <= *side;
            Some(if on_row { v[1] + alpha * side + 1 } else { 0 })
        }
        Rectangle { rows, cols } => {
            if rows.contains(at).ok()? {
                finite_bound(cols)
            } else {
                Some(0)
            }
        }
        Explicit { elements, .. } => Some(
            elements.iter().map(|&z| unpair(z)).filter(|&(i, _)| i == at).map(|(_, j)| j + 1).max().unwrap_or(0),
        ),
        Points { .. } => finite_bound(set).map(|b| {
            (0..b).filter(|&z| set.contains(z).unwrap_or(false)).map(unpair).filter(|&(i, _)| i == at).map(|(_, j)| j + 1).max().unwrap_or(0)
        }),
        Union { of } => of.iter().map(|e| section_bound(at, e)).try_fold(0u64, |acc, b| b.map(|b| acc.max(b))),
        Intersection { of } => of.iter().filter_map(|e| section_bound(at, e)).min(),
        Difference { left, .. } => section_bound(at, left),
        Tagged { copy, set } => {
            if *copy == at {
                finite_bound(set)
            } else {
                Some(0)
            }
        }
        Annotated { set, .. } => section_bound(at, set),
        _ => None,
    }
}

/// Rows at or beyond the returned index have empty sections.
pub fn row_bound(expr: &SetExpr) -> Option<u64> {
    use SetExpr::*;
    match expr {
        Empty { .. } => Some(0),
        Rectangle { rows, cols } => {
            if finite_bound(cols) == Some(0) {
                Some(0)
            } else {
                finite_bound(rows)
            }
        }
        GridCopy { v, alpha, side } => Some(v[0] + alpha * side + 1),
        Explicit { elements, .. } => Some(elements.iter().map(|&z| unpair(z).0 + 1).max().unwrap_or(0)),
        Points { .. } => finite_bound(expr).map(|b| {
            (0..b).filter(|&z| expr.contains(z).unwrap_or(false)).map(|z| unpair(z).0 + 1).max().unwrap_or(0)
        }),
        Union { of } => of.iter().map(row_bound).try_fold(0u64, |acc, b| b.map(|b| acc.max(b))),
        Intersection { of } => of.iter().filter_map(row_bound).min(),
        Difference { left, .. } => row_bound(left),
        Tagged { copy, set } => {
            if finite_bound(set) == Some(0) {
                Some(0)
            } else {
                Some(copy + 1)
            }
        }
        Annotated { set, .. } => row_bound(set),
        _ => None,
    }
}

/// True when the set is infinite by construction.
pub fn known_infinite(expr: &SetExpr) -> bool {
    use SetExpr::*;
    match expr {
        All { .. } | Cofinite { .. } | Squares | Powers { .. } | Arithmetic { .. } | LowerTriangle => true,
        BlockRule { rule, blocks, .. } => {
            let rule_nonempty = match rule {
                self::BlockRule::All | self::BlockRule::Arithmetic { .. } => true,
                self::BlockRule::First { count } | self::BlockRule::Last { count } => match count {
                    CountFn::Const { value } => *value > 0,
                    CountFn::Fraction { num, den } => *num > 0 && num >= den,
                    _ => false,
                },
                self::BlockRule::Nothing => false,
            };
            rule_nonempty && blocks.as_deref().map_or(true, known_infinite)
        }
        Union { of } => of.iter().any(known_infinite),
        Complement { of } => finite_bound(of).is_some(),
        Difference { left, right } => known_infinite(left) && finite_bound(right).is_some(),
        Intersection { of } => {
            // an infinite set intersected only with cofinite sets
            let infinite = of.iter().filter(|e| known_infinite(e)).count();
            infinite >= 1 && of.iter().all(|e| matches!(e, All { .. } | Cofinite { .. }) || known_infinite(e))
                && of.iter().filter(|e| !matches!(e, All { .. } | Cofinite { .. })).count() <= 1
        }
        Image { set, .. } => known_infinite(set),
        Rectangle { rows, cols } => {
            (known_infinite(rows) && finite_bound(cols) != Some(0) && known_nonempty(cols))
                || (known_infinite(cols) && known_nonempty(rows))
        }
        Tagged { set, .. } => known_infinite(set),
        Subsets { set, .. } => known_infinite(set),
        Annotated { set, density, .. } => {
            known_infinite(set) || density.as_ref().is_some_and(|d| d > &Rational::zero())
        }
        _ => false,
    }
}

fn known_nonempty(expr: &SetExpr) -> bool {
    match expr {
        SetExpr::Explicit { elements, .. } => !elements.is_empty(),
        SetExpr::Points { points, .. } => !points.is_empty(),
        SetExpr::FsSet { generators } => !generators.is_empty(),
        e => known_infinite(e),
    }
}

/// Natural density when it follows from the construction.
pub fn known_density(expr: &SetExpr) -> Option<Known<Rational>> {
    use SetExpr::*;
    match expr {
        Empty { .. } | Explicit { .. } | Points { .. } | FsSet { .. } => known(Rational::zero(), "finite set"),
        All { .. } | Cofinite { .. } => known(Rational::one(), "cofinite set"),
        Squares => known(Rational::zero(), "at most sqrt(N)+1 squares below N"),
        Powers { .. } => known(Rational::zero(), "logarithmically many powers below N"),
        Arithmetic { step, .. } => known(rat_u(1, *step as u64), format!("progression with step {step}")),
        BlockRule { rule: self::BlockRule::Nothing, .. } => known(Rational::zero(), "empty rule"),
        BlockRule { rule: self::BlockRule::All, blocks: None, .. } => known(Rational::one(), "every block taken"),
        Complement { of } => {
            let d = known_density(of)?;
            known(Rational::one() - d.value, format!("complement: {}", d.reason))
        }
        Difference { left, right } if finite_bound(right).is_some() => known_density(left),
        Difference { left, .. } if known_density(left).is_some_and(|d| d.value.is_zero()) => {
            known(Rational::zero(), "subset of a density-zero set")
        }
        Intersection { of } if of.iter().any(|e| known_density(e).is_some_and(|d| d.value.is_zero())) => {
            known(Rational::zero(), "subset of a density-zero set")
        }
        Image { map, .. } if matches!(**map, InjectionExpr::Power { exp } if exp >= 2) => {
            known(Rational::zero(), "inside the set of perfect powers of a fixed exponent")
        }
        Image { map, set } if matches!(**set, All { .. }) && matches!(**map, InjectionExpr::Enumeration { .. }) => {
            let InjectionExpr::Enumeration { set: target } = &**map else { unreachable!() };
            known_density(target)
        }
        Image { map, set } => {
            let d = known_density(set)?;
            match **map {
                InjectionExpr::Identity | InjectionExpr::Shift { .. } | InjectionExpr::SwapPairs => {
                    known(d.value, format!("translation-type image: {}", d.reason))
                }
                InjectionExpr::Affine { mul, .. } => {
                    known(d.value / Rational::from_integer(mul.into()), format!("affine image scales density by 1/{mul}"))
                }
                _ if d.value.is_zero() && finite_bound(set).is_some() => known(Rational::zero(), "finite image"),
                _ => None,
            }
        }
        Union { of } if of.iter().all(|e| known_density(e).is_some_and(|d| d.value.is_zero())) => {
            known(Rational::zero(), "finite union of density-zero sets")
        }
        Annotated { density: Some(d), justification, .. } => known(d.clone(), format!("annotation: {justification}")),
        Annotated { set, .. } => known_density(set),
        _ => None,
    }
}

/// An upper bound on the length of arithmetic progressions inside the set.
pub fn ap_length_bound(expr: &SetExpr) -> Option<Known<u64>> {
    use SetExpr::*;
    match expr {
        Empty { .. } => known(0, "empty set"),
        Squares => known(3, "no four squares are in arithmetic progression (Fermat)"),
        Powers { base } => known(2, format!("2·{base}^j = {base}^i + {base}^k has no solution with i < j < k")),
        Explicit { .. } | FsSet { .. } => {
            let b = finite_bound(expr)?;
            let w = expr.window(b).ok()?;
            known(crate::detectors::longest_ap(&w.elements).length, "exact for a finite set")
        }
        Intersection { of } => of.iter().filter_map(ap_length_bound).min_by_key(|k| k.value),
        Difference { left, .. } => ap_length_bound(left),
        Annotated { set, .. } => ap_length_bound(set),
        _ => None,
    }
}

/// Statistics used to accept or reject an analytic annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationCheck {
    pub window: u64,
    #[serde(with = "crate::num::serde_rational")]
    pub claimed: Rational,
    /// `(checkpoint, exact ratio)` pairs, checkpoints `2^k` and the window itself.
    pub checkpoints: Vec<(u64, String)>,
    #[serde(with = "crate::num::serde_rational")]
    pub final_ratio: Rational,
}

pub const DEFAULT_ENVELOPE: (u64, u64) = (1, 100);
/// Checkpoints from this one on must be non-increasing for a density-0 claim.
const TREND_FROM: u64 = 1 << 10;

fn checkpoints(window: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = (0..64).map(|k| 1u64 << k).take_while(|&c| c < window).collect();
    cps.push(window);
    cps
}

/// Validates a density annotation against window statistics at `window`.
///
/// A density-0 claim needs the ratios at the dyadic checkpoints from `2^10`
/// on to be non-increasing and the final ratio to lie below the envelope; a
/// positive claim needs the final ratio within the envelope of the value.
pub fn check_density_annotation(expr: &SetExpr, window: u64) -> Result<Option<AnnotationCheck>> {
    let SetExpr::Annotated { set, density: Some(d), envelope, .. } = expr else { return Ok(None) };
    let env = envelope.clone().unwrap_or_else(|| rat_u(DEFAULT_ENVELOPE.0, DEFAULT_ENVELOPE.1));
    let mut ratios = Vec::new();
    for cp in checkpoints(window) {
        let c = set.count_range(&BigUint::zero(), &BigUint::from(cp))?;
        ratios.push((cp, num::rat_big(&c, &BigUint::from(cp))));
    }
    let final_ratio = ratios.last().expect("window checkpoint").1.clone();
    let fail = |why: String| Err(Error::Annotation(format!("density annotation {} rejected: {why}", num::fmt_rational(d))));
    if d.is_zero() {
        let trend: Vec<&(u64, Rational)> = ratios.iter().filter(|(cp, _)| *cp >= TREND_FROM).collect();
        for pair in trend.windows(2) {
            if pair[1].1 > pair[0].1 && pair[1].0 != window {
                return fail(format!("ratio rises from {} at {} to {} at {}", num::fmt_rational(&pair[0].1), pair[0].0, num::fmt_rational(&pair[1].1), pair[1].0));
            }
        }
        if final_ratio > env {
            return fail(format!("ratio {} at {window} exceeds the envelope {}", num::fmt_rational(&final_ratio), num::fmt_rational(&env)));
        }
    } else {
        let gap = if final_ratio > *d { &final_ratio - d } else { d - &final_ratio };
        if gap > env {
            return fail(format!("ratio {} at {window} is farther than {} from the claim", num::fmt_rational(&final_ratio), num::fmt_rational(&env)));
        }
    }
    Ok(Some(AnnotationCheck {
        window,
        claimed: d.clone(),
        checkpoints: ratios.iter().map(|(c, r)| (*c, num::fmt_rational(r))).collect(),
        final_ratio,
    }))
}
