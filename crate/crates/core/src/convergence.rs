//! Ideal convergence of piecewise-constant rational sequences and
//! invariance tests for injections.

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::ideal::{member, Effort, IdealDescriptor, Verdict, VerdictKind};
use crate::measures::density::prefix_counts;
use crate::measures::dyadic_checkpoints;
use crate::num::{self, rat_u, Rational};
use crate::sets::eval::images;
use crate::sets::{BlockRule, GridSchedule, InjectionExpr, SetExpr};
use crate::witnesses::WitnessReport;

/// `ε = 1/k` for `k ≤ EPS_SCHEDULE`.
pub const EPS_SCHEDULE: u64 = 64;
/// Largest explicit set produced for a reciprocal piece.
const EXPLICIT_CAP: u64 = 1 << 24;
/// Largest constant accepted by the linear-bound criterion.
pub const LINEAR_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValueFn {
    Const {
        #[serde(with = "num::serde_rational")]
        value: Rational,
    },
    /// `x_n = 1/(n + shift)`
    Reciprocal { shift: u64 },
}

impl ValueFn {
    pub fn at(&self, n: u64) -> Rational {
        match self {
            ValueFn::Const { value } => value.clone(),
            ValueFn::Reciprocal { shift } => rat_u(1, n + shift),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub set: SetExpr,
    pub value: ValueFn,
}

/// `x_n` is the value of the first piece whose set contains `n`, else `default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceExpr {
    #[serde(default)]
    pub pieces: Vec<Piece>,
    #[serde(with = "num::serde_rational")]
    pub default: Rational,
}

impl SequenceExpr {
    pub fn constant(value: Rational) -> Self {
        SequenceExpr { pieces: Vec::new(), default: value }
    }

    /// Characteristic function of `set`.
    pub fn indicator(set: SetExpr) -> Self {
        SequenceExpr {
            pieces: vec![Piece { set, value: ValueFn::Const { value: Rational::one() } }],
            default: Rational::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.pieces {
            p.set.space()?.expect(crate::sets::BaseSpace::Omega)?;
            if let ValueFn::Reciprocal { shift: 0 } = p.value {
                return Err(Error::Malformed("reciprocal pieces need shift >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn value_at(&self, n: u64) -> Result<Rational> {
        for p in &self.pieces {
            if p.set.contains(n)? {
                return Ok(p.value.at(n));
            }
        }
        Ok(self.default.clone())
    }

    /// `L(x, ε) = {n : |x_n − x| ≥ ε}`.
    pub fn level_set(&self, x: &Rational, eps: &Rational) -> Result<SetExpr> {
        self.validate()?;
        if !eps.is_positive() {
            return Err(Error::Precondition("ε must be positive".into()));
        }
        let mut parts = Vec::new();
        for (k, p) in self.pieces.iter().enumerate() {
            let own = if k == 0 {
                p.set.clone()
            } else {
                let earlier = self.pieces[..k].iter().map(|q| q.set.clone()).collect();
                SetExpr::difference(p.set.clone(), SetExpr::union(earlier))
            };
            match &p.value {
                ValueFn::Const { value } => {
                    if (value - x).abs() >= *eps {
                        parts.push(own);
                    }
                }
                ValueFn::Reciprocal { shift } => parts.push(match reciprocal_near(*shift, x, eps)? {
                    Near::Below(lo) => SetExpr::intersection(vec![own, SetExpr::explicit(0..lo)]),
                    Near::Finite(near) => SetExpr::difference(own, near),
                }),
            }
        }
        if (&self.default - x).abs() >= *eps {
            let covered = self.pieces.iter().map(|p| p.set.clone()).collect();
            parts.push(SetExpr::complement(SetExpr::union(covered)));
        }
        Ok(match parts.len() {
            0 => SetExpr::empty(),
            1 => parts.pop().expect("one part"),
            _ => SetExpr::union(parts),
        })
    }
}

enum Near {
    /// `{n : n ≥ lo}`
    Below(u64),
    Finite(SetExpr),
}

/// `{n : |1/(n+s) − x| < ε}`, an interval of naturals.
fn reciprocal_near(shift: u64, x: &Rational, eps: &Rational) -> Result<Near> {
    let upper = x + eps;
    let lower = x - eps;
    if !upper.is_positive() {
        return Ok(Near::Finite(SetExpr::empty()));
    }
    // 1/(n+s) < x + ε  ⇔  n > 1/(x+ε) − s
    let lo_r = (Rational::one() / &upper) - num::from_u64(shift);
    let lo = if lo_r.is_negative() { 0 } else { (lo_r.floor().to_integer() + 1u8).to_u64().unwrap_or(u64::MAX) };
    if !lower.is_positive() {
        if lo > EXPLICIT_CAP {
            return Err(Error::EffortExceeded(format!("level set has {lo} explicit points")));
        }
        return Ok(Near::Below(lo));
    }
    // 1/(n+s) > x − ε  ⇔  n < 1/(x−ε) − s
    let hi_r = (Rational::one() / &lower) - num::from_u64(shift);
    let hi = if hi_r.is_positive() { hi_r.ceil().to_integer().to_u64().unwrap_or(u64::MAX) } else { 0 };
    if hi > EXPLICIT_CAP {
        return Err(Error::EffortExceeded(format!("level set has {hi} explicit points")));
    }
    Ok(Near::Finite(SetExpr::explicit(lo..hi.max(lo))))
}

/// Verdict on `L(x, ε) ∈ I`.
pub fn ideal_limit(seq: &SequenceExpr, x: &Rational, eps: &Rational, ideal: &IdealDescriptor, effort: &Effort) -> Result<Verdict> {
    member(ideal, &seq.level_set(x, eps)?, effort)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPoint {
    pub k: u64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    #[serde(with = "num::serde_rational")]
    pub x: Rational,
    /// Verdicts at `ε = 1/k`, `k = 1..=k_max`.
    pub points: Vec<LimitPoint>,
    /// Every level set is proven small.
    pub converges: bool,
    /// `ProvenIn` at `1/k` implies `ProvenIn` at every `1/k′` with `k′ < k`.
    pub monotone: bool,
}

pub fn ideal_limit_schedule(
    seq: &SequenceExpr,
    x: &Rational,
    ideal: &IdealDescriptor,
    effort: &Effort,
    k_max: u64,
) -> Result<LimitReport> {
    let mut points = Vec::new();
    for k in 1..=k_max {
        let verdict = ideal_limit(seq, x, &rat_u(1, k), ideal, effort)?;
        points.push(LimitPoint { k, verdict });
    }
    let proven: Vec<bool> = points.iter().map(|p| p.verdict.kind() == VerdictKind::ProvenIn).collect();
    let monotone = proven.windows(2).all(|w| w[0] || !w[1]);
    Ok(LimitReport { x: x.clone(), converges: proven.iter().all(|&b| b), monotone, points })
}

/// `x_n = 1/k` on `A_k ∖ ⋃_{m<k} A_m` (`k ≥ 1`), `0` elsewhere.
pub fn c3_diagonal(family: &[SetExpr]) -> SequenceExpr {
    SequenceExpr {
        pieces: family
            .iter()
            .enumerate()
            .map(|(i, a)| Piece { set: a.clone(), value: ValueFn::Const { value: rat_u(1, i as u64 + 1) } })
            .collect(),
        default: Rational::zero(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C3Report {
    pub sequence: SequenceExpr,
    pub family_verdicts: Vec<VerdictKind>,
    /// `k` for which `L(0, 1/k) ⊆ A_1 ∪ … ∪ A_k` failed on the window.
    pub inclusion_failures: Vec<u64>,
    pub limit: LimitReport,
    pub window: u64,
}

/// Builds the diagonal sequence and checks it converges to 0 along the ideal.
pub fn c3_check(family: &[SetExpr], ideal: &IdealDescriptor, effort: &Effort, window: u64) -> Result<C3Report> {
    let mut family_verdicts = Vec::new();
    for (i, a) in family.iter().enumerate() {
        let v = member(ideal, a, effort)?;
        if !v.is_in() {
            return Err(Error::Precondition(format!("family member {} is not small ({})", i + 1, v.summary())));
        }
        family_verdicts.push(v.kind());
    }
    let sequence = c3_diagonal(family);
    let zero = Rational::zero();
    let k_max = EPS_SCHEDULE.max(family.len() as u64);
    let mut inclusion_failures = Vec::new();
    for k in 1..=k_max {
        let level = sequence.level_set(&zero, &rat_u(1, k))?.window(window)?;
        let upto = family[..family.len().min(k as usize)].to_vec();
        let union = SetExpr::union(upto).window(window)?;
        if level.elements.iter().any(|&n| !union.contains(n)) {
            inclusion_failures.push(k);
        }
    }
    let limit = ideal_limit_schedule(&sequence, &zero, ideal, effort, k_max)?;
    Ok(C3Report { sequence, family_verdicts, inclusion_failures, limit, window })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    BiInvariantEvidence,
    InvariantEvidence,
    /// Some `A ∈ I` with `f[A] ∉ I`, both proven.
    NotInvariant,
    /// Some `A ∉ I` with `f[A] ∈ I`, both proven.
    NotBiInvariant,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceSample {
    pub set: SetExpr,
    pub source: Verdict,
    pub image: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub injection: InjectionExpr,
    pub ideal: IdealDescriptor,
    pub samples: Vec<InvarianceSample>,
    pub classification: Classification,
    /// Index of the sample with certified opposite verdicts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<usize>,
}

const INJECTIVITY_WINDOW: u64 = 1 << 16;

pub fn invariance_test(f: &InjectionExpr, ideal: &IdealDescriptor, family: &[SetExpr], effort: &Effort) -> Result<InvarianceReport> {
    let w = effort.check_window.min(INJECTIVITY_WINDOW);
    images(f, w, w.saturating_mul(4))?;
    let mut samples = Vec::new();
    for x in family {
        let source = member(ideal, x, effort)?;
        let image = member(ideal, &SetExpr::image(f.clone(), x.clone()), effort)?;
        samples.push(InvarianceSample { set: x.clone(), source, image });
    }
    let proven_flip = |a: VerdictKind, b: VerdictKind| samples.iter().position(|s| s.source.kind() == a && s.image.kind() == b);
    let (classification, violation) = if let Some(i) = proven_flip(VerdictKind::ProvenIn, VerdictKind::ProvenOut) {
        (Classification::NotInvariant, Some(i))
    } else if let Some(i) = proven_flip(VerdictKind::ProvenOut, VerdictKind::ProvenIn) {
        (Classification::NotBiInvariant, Some(i))
    } else {
        let decided: Vec<&InvarianceSample> =
            samples.iter().filter(|s| s.source.kind() != VerdictKind::Unknown && s.image.kind() != VerdictKind::Unknown).collect();
        let in_to_out = decided.iter().any(|s| s.source.is_in() && s.image.is_out());
        let out_to_in = decided.iter().any(|s| s.source.is_out() && s.image.is_in());
        let c = match (decided.is_empty(), in_to_out, out_to_in) {
            (true, _, _) | (_, true, _) => Classification::Inconclusive,
            (false, false, false) => Classification::BiInvariantEvidence,
            (false, false, true) => Classification::InvariantEvidence,
        };
        (c, None)
    };
    Ok(InvarianceReport { injection: f.clone(), ideal: ideal.clone(), samples, classification, violation })
}

/// Both criteria for bi-`I_d`-invariance of an increasing injection on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IddBiinvariance {
    pub window: u64,
    /// `#{n : f(n) < N}`
    pub count: u64,
    /// `max_{1 ≤ n < count} ⌈f(n)/n⌉`
    pub c: u64,
    /// Same over the points with `f(n) < N/256`.
    pub c_early: u64,
    /// `count / N`
    #[serde(with = "num::serde_rational")]
    pub density: Rational,
    #[serde(with = "num::serde_rational")]
    pub density_early: Rational,
    pub linear_ok: bool,
    pub density_ok: bool,
    pub bi_invariant: bool,
}

/// `f(n) ≤ Cn` with a stable `C ≤ 2^20`, against `d(f[ω]) ≥ 1/(2C)` with a
/// stable image density. The window at `N/256` separates a bounded ratio
/// from one that keeps growing.
pub fn idd_biinvariance(f: &InjectionExpr, window: u64) -> Result<IddBiinvariance> {
    let early_window = window / 256;
    if early_window < 2 {
        return Err(Error::Precondition("window must be at least 512".into()));
    }
    let ev = f.evaluator(window)?;
    let mut values = Vec::new();
    let mut prev: Option<u64> = None;
    for n in 0..window {
        let Some(y) = ev.apply(n)? else { break };
        if let Some(p) = prev {
            if y <= p {
                return Err(Error::NotIncreasing { at: n });
            }
        }
        if y >= window {
            break;
        }
        values.push(y);
        prev = Some(y);
    }
    let count = values.len() as u64;
    if count < 2 {
        return Err(Error::EffortExceeded(format!("f has fewer than two values below {window}")));
    }
    let c_upto = |k: usize| values[1..k].iter().enumerate().map(|(i, &y)| y.div_ceil(i as u64 + 1)).max().unwrap_or(1);
    let early_count = values.partition_point(|&y| y < early_window);
    let c = c_upto(values.len());
    let c_early = c_upto(early_count.max(1));
    let density = rat_u(count, window);
    let density_early = rat_u(early_count as u64, early_window);
    let stable = early_count < 2;
    let linear_ok = c <= LINEAR_CAP && (stable || c <= 4 * c_early);
    let density_ok = density >= rat_u(1, 2 * LINEAR_CAP)
        && density >= rat_u(1, 2 * c)
        && (stable || density >= &density_early / num::from_u64(4));
    if linear_ok != density_ok {
        return Err(Error::Internal(format!(
            "linear bound (C = {c}, early C = {c_early}) and image density ({} vs early {}) disagree",
            num::fmt_rational(&density),
            num::fmt_rational(&density_early)
        )));
    }
    Ok(IddBiinvariance {
        window,
        count,
        c,
        c_early,
        density,
        density_early,
        linear_ok,
        density_ok,
        bi_invariant: linear_ok,
    })
}

/// Smallest checkpoint used for lower-density evidence.
const C5_FROM: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C5Sample {
    pub b: SetExpr,
    #[serde(with = "num::serde_rational")]
    pub min_density: Rational,
    pub accepted: bool,
    /// Minimum checkpoint density of `B ∖ A`, for accepted `B`.
    #[serde(with = "num::serde_rational_opt")]
    pub difference_min_density: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C5Report {
    pub a: SetExpr,
    pub window: u64,
    /// `(checkpoint, |A ∩ [0, c)| / c)`
    pub a_density: Vec<(u64, String)>,
    #[serde(with = "num::serde_rational")]
    pub a_min: Rational,
    #[serde(with = "num::serde_rational")]
    pub a_max: Rational,
    pub samples: Vec<C5Sample>,
    pub report: WitnessReport,
}

/// `A = ⋃ {[2^{j²}, 2^{j²+1}) : j ∈ ω}`: lower density 0, upper density ≥ 1/2.
pub fn c5_set() -> SetExpr {
    // block I_n = [2^{n-1}, 2^n) is taken when n − 1 is a square
    SetExpr::block_rule_on(GridSchedule::Dyadic, BlockRule::All, SetExpr::image(InjectionExpr::shift(1), SetExpr::Squares))
}

/// Default test family for the refuter.
pub fn c5_family() -> Vec<SetExpr> {
    vec![
        SetExpr::all(),
        SetExpr::evens(),
        SetExpr::odds(),
        SetExpr::arithmetic(1, 3),
        SetExpr::complement(SetExpr::Squares),
        SetExpr::union(vec![c5_set(), SetExpr::arithmetic(0, 5)]),
        c5_set(),
    ]
}

fn checkpoint_densities(set: &SetExpr, cps: &[u64]) -> Result<Vec<Rational>> {
    Ok(prefix_counts(set, cps)?.into_iter().zip(cps).map(|(n, &c)| rat_u(n, c)).collect())
}

/// For every sampled `B` of positive lower density, `B ∖ A` keeps positive
/// lower density, so `A` cannot be removed from `B` at the cost of an `I_d`-set.
pub fn c5_refuter_idd(window: u64, family: &[SetExpr]) -> Result<C5Report> {
    let cps: Vec<u64> = dyadic_checkpoints(window).into_iter().filter(|&c| c >= C5_FROM).collect();
    if cps.len() < 4 {
        return Err(Error::Precondition(format!("window must reach at least {}", C5_FROM << 3)));
    }
    let a = c5_set();
    let a_dens = checkpoint_densities(&a, &cps)?;
    let a_min = a_dens.iter().min().cloned().expect("nonempty");
    let a_max = a_dens.iter().max().cloned().expect("nonempty");
    let beta = rat_u(1, C5_FROM);
    let mut samples = Vec::new();
    for b in family {
        let d = checkpoint_densities(b, &cps)?;
        let min_density = d.into_iter().min().expect("nonempty");
        let accepted = min_density >= beta;
        let difference_min_density = if accepted {
            let diff = SetExpr::difference(b.clone(), a.clone());
            checkpoint_densities(&diff, &cps)?.into_iter().min()
        } else {
            None
        };
        samples.push(C5Sample { b: b.clone(), min_density, accepted, difference_min_density });
    }
    let mut report = WitnessReport::new("c5-refute", json!({ "window": window, "family": family }), window);
    report.check(
        "A oscillates: checkpoint densities reach 1/2 and fall below 1/16",
        a_max >= rat_u(1, 2) && a_min < beta,
        format!("min {}, max {}", num::approx(&a_min), num::approx(&a_max)),
    );
    report.check(
        "B ∖ A keeps positive lower density for every accepted B",
        samples.iter().filter(|s| s.accepted).all(|s| s.difference_min_density.as_ref().is_some_and(|d| d.is_positive())),
        format!("{} of {} samples accepted", samples.iter().filter(|s| s.accepted).count(), samples.len()),
    );
    let a_density = cps.iter().zip(&a_dens).map(|(&c, d)| (c, num::fmt_rational(d))).collect();
    Ok(C5Report { a, window, a_density, a_min, a_max, samples, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;

    #[test]
    fn reciprocal_level_sets_are_finite() {
        let seq = SequenceExpr { pieces: vec![Piece { set: SetExpr::all(), value: ValueFn::Reciprocal { shift: 1 } }], default: rat(0, 1) };
        let l = seq.level_set(&rat(0, 1), &rat(1, 10)).unwrap();
        // 1/(n+1) ≥ 1/10 for n ≤ 9
        assert_eq!(l.window(1000).unwrap().elements, (0..10).collect::<Vec<_>>());
        let v = ideal_limit(&seq, &rat(0, 1), &rat(1, 10), &IdealDescriptor::fin(), &Effort::default()).unwrap();
        assert_eq!(v.kind(), VerdictKind::ProvenIn);
    }

    #[test]
    fn reciprocal_near_a_positive_limit() {
        let seq = SequenceExpr { pieces: vec![Piece { set: SetExpr::all(), value: ValueFn::Reciprocal { shift: 1 } }], default: rat(0, 1) };
        // |1/(n+1) − 1/4| < 1/8 ⇔ n+1 ∈ (8/3, 8) ⇔ n ∈ {2,..,6}
        let l = seq.level_set(&rat(1, 4), &rat(1, 8)).unwrap();
        let w = l.window(20).unwrap().elements;
        let want: Vec<u64> = (0..20).filter(|n| !(2..=6).contains(n)).collect();
        assert_eq!(w, want);
    }

    #[test]
    fn diagonal_values() {
        let fam = vec![
            SetExpr::intersection(vec![SetExpr::evens(), SetExpr::Squares]),
            SetExpr::intersection(vec![SetExpr::odds(), SetExpr::Squares]),
        ];
        let seq = c3_diagonal(&fam);
        assert_eq!(seq.value_at(16).unwrap(), rat(1, 1));
        assert_eq!(seq.value_at(9).unwrap(), rat(1, 2));
        assert_eq!(seq.value_at(7).unwrap(), rat(0, 1));
        assert_eq!(c3_diagonal(&[]).value_at(3).unwrap(), rat(0, 1));
    }

    #[test]
    fn overlapping_pieces_use_priority() {
        let seq = c3_diagonal(&[SetExpr::evens(), SetExpr::arithmetic(0, 4)]);
        let l = seq.level_set(&rat(0, 1), &rat(1, 2)).unwrap();
        let only_second = SetExpr::difference(SetExpr::arithmetic(0, 4), SetExpr::evens());
        assert!(only_second.window(100).unwrap().elements.is_empty());
        assert_eq!(l.window(100).unwrap().elements, SetExpr::evens().window(100).unwrap().elements);
    }

    #[test]
    fn square_map_is_not_bi_invariant() {
        let r = idd_biinvariance(&InjectionExpr::power(2), 1_000_000).unwrap();
        assert_eq!(r.density, rat(1000, 1_000_000));
        assert!(!r.bi_invariant);
        let r = idd_biinvariance(&InjectionExpr::affine(2, 0), 1_000_000).unwrap();
        assert!(r.bi_invariant);
        assert_eq!(r.c, 2);
        let r = idd_biinvariance(&InjectionExpr::shift(1000), 1_000_000).unwrap();
        assert!(r.bi_invariant);
        assert_eq!(r.c, 1001);
    }

    #[test]
    fn c5_set_blocks() {
        let a = c5_set().window(64).unwrap().elements;
        let want: Vec<u64> = [1u64].into_iter().chain(2..4).chain(16..32).collect();
        assert_eq!(a, want);
    }
}
