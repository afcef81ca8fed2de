use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use super::verdict::{Certificate, Verdict, Witness};
use super::{Effort, IdealDescriptor};
use crate::detectors::{column_profile, find_fs_generator, find_grid_copy, find_grid_copy_1d, longest_ap, ramsey_block, ApWitness};
use crate::error::{Error, Result};
use crate::measures::{density_window, eu_ratio_bounds, relative_density, sum_range, WeightFn};
use crate::num::{self, rat_big, rat_u, Rational};
use crate::sets::analysis::{
    ap_length_bound, check_density_annotation, finite_bound, known_density, known_infinite, row_bound,
};
use crate::sets::space::binomial;
use crate::sets::{pair, unpair, BaseSpace, BlockRule, CountFn, GridSchedule, SetExpr};

/// Window ratios at or above this count as evidence of positivity.
const EVIDENCE_LEVEL: (u64, u64) = (1, 100);
/// Elements examined by the AP search before giving up on growing the window.
const AP_SEARCH_ELEMENTS: usize = 4096;
/// Window for finite-sums searches.
const FS_SEARCH_BOUND: u64 = 128;
/// Largest generator size tried for Folkman evidence.
const FOLKMAN_MAX_N: u64 = 5;

fn level() -> Rational {
    rat_u(EVIDENCE_LEVEL.0, EVIDENCE_LEVEL.1)
}

/// Three-valued membership of `set` in `ideal`.
///
/// Effort exhaustion inside a computation yields `Unknown`; a mismatched
/// base space or an annotation that fails its window check is an error.
pub fn member(ideal: &IdealDescriptor, set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let space = ideal.space()?;
    space.expect(set.space()?)?;
    check_annotations(set, effort.check_window)?;
    match decide(ideal, set, effort) {
        Err(e) if e.is_effort() => Ok(Verdict::Unknown { detail: e.to_string(), effort: effort.budget }),
        other => other,
    }
}

fn check_annotations(set: &SetExpr, window: u64) -> Result<()> {
    use SetExpr::*;
    match set {
        Annotated { set: inner, .. } => {
            check_density_annotation(set, window)?;
            check_annotations(inner, window)
        }
        Union { of } | Intersection { of } => of.iter().try_for_each(|e| check_annotations(e, window)),
        Difference { left, right } => {
            check_annotations(left, window)?;
            check_annotations(right, window)
        }
        Complement { of } => check_annotations(of, window),
        Image { set, .. } | Preimage { set, .. } | Section { set, .. } | Tagged { set, .. } | Subsets { set, .. } => {
            check_annotations(set, window)
        }
        Rectangle { rows, cols } => {
            check_annotations(rows, window)?;
            check_annotations(cols, window)
        }
        BlockRule { blocks: Some(b), .. } => check_annotations(b, window),
        _ => Ok(()),
    }
}

fn decide(ideal: &IdealDescriptor, set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let Some(bound) = finite_bound(set) {
        return Ok(Verdict::ProvenIn { certificate: Certificate::Finite { bound }, effort: e });
    }
    if let Some(v) = closure(ideal, set, effort)? {
        return Ok(v);
    }
    use IdealDescriptor as D;
    match ideal {
        D::Fin { .. } => fin(set, effort),
        D::FinOplusFull => {
            let v = fin(&simplify_section(1, set), effort)?;
            Ok(wrap_section(1, v, "copy 1 is finite"))
        }
        D::EdFin => ed_fin(set, effort),
        D::Ramsey { n } => ramsey(*n, set, effort),
        D::VanDerWaerden => van_der_waerden(set, effort),
        D::Gallai { n: 1 } => gallai_1(set, effort),
        D::Gallai { .. } => gallai_2(set, effort),
        D::Hindman => hindman(set, effort),
        D::Folkman => folkman(set, effort),
        D::DensityZero => density_zero(set, effort, None),
        D::Summable { weight } => summable(weight, set, effort),
        D::ErdosUlam { weight } => erdos_ulam(weight, set, effort),
        D::FarahDensity { schedule } => farah(schedule, set, effort),
        D::Restriction { ideal: inner, carrier } => restriction(inner, carrier, set, effort),
        D::DirectSum { left, right } => direct_sum(left, right, set, effort),
        D::FubiniProduct { outer, inner } => fubini(outer, &[], inner, set, effort),
        D::FubiniSum { outer, inners, default } => fubini(outer, inners, default, set, effort),
    }
}

/// Closure under finite unions and subsets, applied to the top operator.
fn closure(ideal: &IdealDescriptor, set: &SetExpr, effort: &Effort) -> Result<Option<Verdict>> {
    let e = effort.budget;
    match set {
        SetExpr::Union { of } if !of.is_empty() => {
            let mut certs = Vec::new();
            for (index, part) in of.iter().enumerate() {
                match member(ideal, part, effort)? {
                    Verdict::ProvenOut { witness, .. } => {
                        return Ok(Some(Verdict::ProvenOut {
                            witness: Witness::Part { index, inner: Box::new(witness) },
                            effort: e,
                        }))
                    }
                    Verdict::ProvenIn { certificate, .. } => certs.push(certificate),
                    _ => {}
                }
            }
            Ok((certs.len() == of.len()).then(|| Verdict::ProvenIn {
                certificate: Certificate::Composite { rule: "finite union of small sets".into(), parts: certs },
                effort: e,
            }))
        }
        SetExpr::Intersection { of } => {
            for part in of {
                if let Verdict::ProvenIn { certificate, .. } = member(ideal, part, effort)? {
                    return Ok(Some(Verdict::ProvenIn {
                        certificate: Certificate::Composite { rule: "subset of a small set".into(), parts: vec![certificate] },
                        effort: e,
                    }));
                }
            }
            Ok(None)
        }
        SetExpr::Difference { left, .. } => match member(ideal, left, effort)? {
            Verdict::ProvenIn { certificate, .. } => Ok(Some(Verdict::ProvenIn {
                certificate: Certificate::Composite { rule: "subset of a small set".into(), parts: vec![certificate] },
                effort: e,
            })),
            _ => Ok(None),
        },
        _ => Ok(None),
    }
}

/// `A ∩ X`, without nesting when one side already decides it.
pub(crate) fn intersect(a: &SetExpr, x: &SetExpr) -> SetExpr {
    match (a, x) {
        _ if a == x => a.clone(),
        (_, SetExpr::All { .. }) => a.clone(),
        (SetExpr::All { .. }, _) => x.clone(),
        (SetExpr::Intersection { of }, _) if of.contains(x) => a.clone(),
        _ => SetExpr::intersection(vec![a.clone(), x.clone()]),
    }
}

/// The section `{y : (at, y) ∈ set}` (or copy `at` of a two-copies set),
/// pushed through the expression where possible.
pub fn simplify_section(at: u64, set: &SetExpr) -> SetExpr {
    use SetExpr::*;
    let fallback = || SetExpr::section(at, set.clone());
    match set {
        Empty { .. } => SetExpr::empty(),
        All { .. } => SetExpr::all(),
        Explicit { elements, space } => match space {
            BaseSpace::TwoCopies => SetExpr::explicit(elements.iter().filter(|&&z| z % 2 == at).map(|&z| z / 2)),
            s if s.is_product() => {
                let mut v: Vec<u64> = elements.iter().map(|&z| unpair(z)).filter(|p| p.0 == at).map(|p| p.1).collect();
                v.sort_unstable();
                SetExpr::explicit(v)
            }
            _ => fallback(),
        },
        Points { points, space } => {
            let codes: Option<Vec<u64>> = points.iter().map(|p| space.encode(p).ok()).collect();
            match codes {
                Some(codes) => simplify_section(at, &SetExpr::Explicit { elements: codes, space: *space }),
                None => fallback(),
            }
        }
        Cofinite { excluded, space } => match space {
            BaseSpace::TwoCopies => SetExpr::Cofinite {
                excluded: excluded.iter().filter(|&&z| z % 2 == at).map(|&z| z / 2).collect(),
                space: BaseSpace::Omega,
            },
            s if s.is_product() => SetExpr::Cofinite {
                excluded: excluded.iter().map(|&z| unpair(z)).filter(|p| p.0 == at).map(|p| p.1).collect(),
                space: BaseSpace::Omega,
            },
            _ => fallback(),
        },
        LowerTriangle => SetExpr::explicit(0..=at),
        Rectangle { rows, cols } => match rows.contains(at) {
            Ok(true) => (**cols).clone(),
            Ok(false) => SetExpr::empty(),
            Err(_) => fallback(),
        },
        GridCopy { v, alpha, side } => {
            let on_row = at > v[0] && (at - v[0]) % alpha == 0 && (at - v[0]) / alpha <= *side;
            if on_row {
                SetExpr::explicit((1..=*side).map(|b| v[1] + alpha * b))
            } else {
                SetExpr::empty()
            }
        }
        Tagged { copy, set } => {
            if *copy == at {
                (**set).clone()
            } else {
                SetExpr::empty()
            }
        }
        Union { of } => SetExpr::union(of.iter().map(|e| simplify_section(at, e)).collect()),
        Intersection { of } => SetExpr::intersection(of.iter().map(|e| simplify_section(at, e)).collect()),
        Difference { left, right } => SetExpr::difference(simplify_section(at, left), simplify_section(at, right)),
        Complement { of } => SetExpr::complement(simplify_section(at, of)),
        Annotated { set, .. } => simplify_section(at, set),
        _ => fallback(),
    }
}

fn wrap_section(part: u64, v: Verdict, rule: &str) -> Verdict {
    match v {
        Verdict::ProvenIn { certificate, effort } => Verdict::ProvenIn {
            certificate: Certificate::Composite { rule: rule.into(), parts: vec![certificate] },
            effort,
        },
        Verdict::ProvenOut { witness, effort } => {
            Verdict::ProvenOut { witness: Witness::Section { part, inner: Box::new(witness) }, effort }
        }
        Verdict::EvidenceOut { strength, detail, witness, effort } => Verdict::EvidenceOut {
            strength,
            detail: format!("copy {part}: {detail}"),
            witness: witness.map(|w| Witness::Section { part, inner: Box::new(w) }),
            effort,
        },
        Verdict::EvidenceIn { strength, detail, effort } => {
            Verdict::EvidenceIn { strength, detail: format!("copy {part}: {detail}"), effort }
        }
        Verdict::Unknown { detail, effort } => Verdict::Unknown { detail: format!("copy {part}: {detail}"), effort },
    }
}

fn fin(set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if known_infinite(set) {
        let mut bound = 1024u64;
        let mut w = set.window(bound)?;
        while w.len() < 10 && bound < effort.check_window {
            bound = bound.saturating_mul(4).min(effort.check_window);
            w = set.window(bound)?;
        }
        let elements: Vec<u64> = w.elements.iter().copied().take(64).collect();
        return Ok(Verdict::ProvenOut {
            witness: Witness::Infinite { reason: "infinite by construction".into(), bound, elements },
            effort: e,
        });
    }
    let cw = effort.check_window;
    let late = set.count_range(&BigUint::from(cw / 2), &BigUint::from(cw))?;
    if late.is_zero() {
        Ok(Verdict::EvidenceIn { strength: cw, detail: format!("no elements in [{}, {cw})", cw / 2), effort: e })
    } else {
        Ok(Verdict::EvidenceOut {
            strength: cw,
            detail: format!("{late} elements in [{}, {cw})", cw / 2),
            witness: None,
            effort: e,
        })
    }
}

/// A uniform bound on column sizes that follows from the construction.
fn column_bound(set: &SetExpr) -> Option<u64> {
    use SetExpr::*;
    match set {
        Empty { .. } => Some(0),
        Rectangle { cols, .. } => {
            let b = finite_bound(cols)?;
            Some(cols.count_below(b).ok()?)
        }
        GridCopy { side, .. } => Some(*side),
        Union { of } => of.iter().map(column_bound).try_fold(0u64, |acc, b| b.map(|b| acc + b)),
        Intersection { of } => of.iter().filter_map(column_bound).min(),
        Difference { left, .. } | Annotated { set: left, .. } => column_bound(left),
        _ => None,
    }
}

fn ed_fin(set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let Some(m) = column_bound(set) {
        return Ok(Verdict::ProvenIn {
            certificate: Certificate::structural(format!("every column holds at most {m} points")),
            effort: e,
        });
    }
    if let SetExpr::Rectangle { rows, cols } = set {
        if known_infinite(cols) {
            if let Some(k) = rows.first_below(effort.check_window)? {
                let col = simplify_section(k, set);
                let points: Vec<u64> =
                    col.window(64)?.elements.iter().map(|&j| pair(k, j)).collect::<Result<_>>()?;
                return Ok(Verdict::ProvenOut {
                    witness: Witness::Infinite { reason: format!("column {k} is infinite"), bound: 64, elements: points },
                    effort: e,
                });
            }
        }
    }
    // every point with i + j < side lies below the triangular number T(side)
    let target = e.max(1);
    let side = 2 * target + 2;
    let bound = side * (side + 1) / 2;
    let w = set.window(bound)?;
    let inside: Vec<u64> = w.elements.iter().copied().filter(|&z| {
        let (i, j) = unpair(z);
        i + j < side
    }).collect();
    let profile = column_profile(&inside);
    if let Some((&k, &c)) = profile.counts.iter().find(|(_, &c)| c >= target) {
        let points: Vec<u64> = inside.iter().copied().filter(|&z| unpair(z).0 == k).collect();
        return Ok(Verdict::EvidenceOut {
            strength: bound,
            detail: format!("column {k} holds {c} elements"),
            witness: Some(Witness::Column { column: k, points }),
            effort: e,
        });
    }
    Ok(Verdict::EvidenceIn {
        strength: bound,
        detail: format!("columns hold at most {} points below {bound}", profile.max),
        effort: e,
    })
}

fn ramsey(n: u32, set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let SetExpr::Subsets { set: base, .. } = set {
        if known_infinite(base) {
            let elements = set.window(1024)?.elements.into_iter().take(64).collect();
            return Ok(Verdict::ProvenOut {
                witness: Witness::Infinite { reason: "[S]^n with S infinite".into(), bound: 1024, elements },
                effort: e,
            });
        }
    }
    if n == 1 {
        return fin(set, effort);
    }
    if n > 3 {
        return Ok(Verdict::Unknown { detail: format!("no block search for n = {n}"), effort: e });
    }
    let m = (e as usize).clamp(n as usize, crate::detectors::RAMSEY_BLOCK_CAP);
    let vertices = 3 * m as u64;
    let bound = u64::try_from(binomial(vertices, n as u64)).map_err(|_| Error::EffortExceeded("window too large".into()))?;
    let codes = set.window(bound)?.elements;
    match ramsey_block(&codes, n, m)? {
        Some(block) => Ok(Verdict::EvidenceOut {
            strength: bound,
            detail: format!("[B]^{n} inside the set for B = {block:?}"),
            witness: Some(Witness::RamseyBlock { n, block }),
            effort: e,
        }),
        None => Ok(Verdict::EvidenceIn {
            strength: bound,
            detail: format!("no block of size {m} among the first {vertices} naturals"),
            effort: e,
        }),
    }
}

fn van_der_waerden(set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let Some(k) = ap_length_bound(set) {
        return Ok(Verdict::ProvenIn {
            certificate: Certificate::structural(format!("progressions have length at most {} ({})", k.value, k.reason)),
            effort: e,
        });
    }
    let target = e.max(1);
    let mut bound = (4 * target).max(16);
    loop {
        let w = set.window(bound)?;
        let r = longest_ap(&w.elements);
        if r.length >= target {
            let ap = r.witness.expect("nonempty");
            return Ok(Verdict::EvidenceOut {
                strength: bound,
                detail: format!("progression of length {target} below {bound}"),
                witness: Some(Witness::Ap { ap: ApWitness { length: target, ..ap } }),
                effort: e,
            });
        }
        if w.len() >= AP_SEARCH_ELEMENTS || bound >= effort.check_window {
            return Ok(Verdict::EvidenceIn {
                strength: bound,
                detail: format!("longest progression below {bound} has length {}", r.length),
                effort: e,
            });
        }
        bound = bound.saturating_mul(2).min(effort.check_window);
    }
}

fn gallai_1(set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let Some(k) = ap_length_bound(set) {
        return Ok(Verdict::ProvenIn {
            certificate: Certificate::structural(format!("progressions have length at most {} ({})", k.value, k.reason)),
            effort: e,
        });
    }
    let k = e.clamp(1, 64);
    let bound = (8 * k).max(64);
    let w = set.window(bound)?;
    match find_grid_copy_1d(&w.elements, k) {
        Some(grid) => Ok(Verdict::EvidenceOut {
            strength: bound,
            detail: format!("grid of side {k} below {bound}"),
            witness: Some(Witness::Grid { grid }),
            effort: e,
        }),
        None => Ok(Verdict::EvidenceIn { strength: bound, detail: format!("no grid of side {k} below {bound}"), effort: e }),
    }
}

fn gallai_2(set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    let k = e.clamp(1, 8);
    let side = 4 * k + 4;
    let bound = pair(side, side)?;
    let w = set.window(bound)?;
    let inside: Vec<u64> = w.elements.iter().copied().filter(|&z| {
        let (i, j) = unpair(z);
        i < side && j < side
    }).collect();
    match find_grid_copy(&inside, k) {
        Some(grid) => Ok(Verdict::EvidenceOut {
            strength: bound,
            detail: format!("grid of side {k} inside [0, {side})²"),
            witness: Some(Witness::Grid { grid }),
            effort: e,
        }),
        None => Ok(Verdict::EvidenceIn { strength: bound, detail: format!("no grid of side {k} inside [0, {side})²"), effort: e }),
    }
}

/// Reason why no two distinct elements of the set sum into it.
fn no_pair_sums(set: &SetExpr) -> Option<String> {
    match set {
        SetExpr::Arithmetic { start, step } if *step > 0 && start % (*step as u64) != 0 => Some(format!(
            "sums of two terms are {} mod {step}, never {} mod {step}",
            (2 * start) % *step as u64,
            start % *step as u64
        )),
        SetExpr::Powers { base } => Some(format!("a sum of two distinct powers of {base} is never a power of {base}")),
        SetExpr::Annotated { set, .. } => no_pair_sums(set),
        _ => None,
    }
}

fn hindman(set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let Some(reason) = no_pair_sums(set) {
        return Ok(Verdict::ProvenIn { certificate: Certificate::structural(reason), effort: e });
    }
    let n = e.clamp(2, 4) as usize;
    let w = set.window(FS_SEARCH_BOUND)?;
    match find_fs_generator(&w.elements, FS_SEARCH_BOUND, n) {
        Some(b) => Ok(Verdict::EvidenceOut {
            strength: FS_SEARCH_BOUND,
            detail: format!("FS({b:?}) inside the set"),
            witness: Some(Witness::FiniteSums { generators: b }),
            effort: e,
        }),
        None => Ok(Verdict::EvidenceIn {
            strength: FS_SEARCH_BOUND,
            detail: format!("no FS(B) with |B| = {n} below {FS_SEARCH_BOUND}"),
            effort: e,
        }),
    }
}

fn folkman(set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let Some(reason) = no_pair_sums(set) {
        return Ok(Verdict::ProvenIn { certificate: Certificate::structural(format!("n = 2 fails: {reason}")), effort: e });
    }
    let w = set.window(FS_SEARCH_BOUND)?;
    let mut last = None;
    for n in 2..=e.clamp(2, FOLKMAN_MAX_N) {
        match find_fs_generator(&w.elements, FS_SEARCH_BOUND, n as usize) {
            Some(b) => last = Some(b),
            None => {
                return Ok(Verdict::EvidenceIn {
                    strength: FS_SEARCH_BOUND,
                    detail: format!("no FS(B) with |B| = {n} below {FS_SEARCH_BOUND}"),
                    effort: e,
                })
            }
        }
    }
    let b = last.expect("at least one size tried");
    Ok(Verdict::EvidenceOut {
        strength: FS_SEARCH_BOUND,
        detail: format!("FS(B) inside the set for every tried size up to {}", b.len()),
        witness: Some(Witness::FiniteSums { generators: b }),
        effort: e,
    })
}

fn density_zero(set: &SetExpr, effort: &Effort, note: Option<&str>) -> Result<Verdict> {
    let e = effort.budget;
    let prefix = note.map(|n| format!("{n}; ")).unwrap_or_default();
    if let Some(d) = known_density(set) {
        if d.value.is_zero() {
            let certificate = match set {
                SetExpr::Annotated { density: Some(_), .. } => Certificate::Annotation {
                    check: check_density_annotation(set, effort.check_window)?.expect("density annotation"),
                    reason: format!("{prefix}{}", d.reason),
                },
                _ => Certificate::structural(format!("{prefix}density 0: {}", d.reason)),
            };
            return Ok(Verdict::ProvenIn { certificate, effort: e });
        }
        return Ok(Verdict::ProvenOut {
            witness: Witness::PositiveDensity { value: d.value, reason: format!("{prefix}{}", d.reason) },
            effort: e,
        });
    }
    let est = density_window(set, effort.check_window)?;
    let detail = format!(
        "{prefix}ratio {} at {}, upper envelope {}",
        num::fmt_rational(&est.ratio),
        est.bound,
        num::fmt_rational(&est.limsup)
    );
    if est.limsup >= level() {
        Ok(Verdict::EvidenceOut { strength: est.bound, detail, witness: None, effort: e })
    } else {
        Ok(Verdict::EvidenceIn { strength: est.bound, detail, effort: e })
    }
}

fn weight_scale(weight: &WeightFn) -> Result<Rational> {
    let mut m = Rational::zero();
    for k in 0..16 {
        let w = weight.at(k)?;
        if w > m {
            m = w;
        }
    }
    Ok(m)
}

/// Reason why the weighted sum over the set converges by construction.
fn converges_by_construction(weight: &WeightFn, set: &SetExpr) -> Option<String> {
    let harmonic_like = matches!(weight, WeightFn::Reciprocal { .. } | WeightFn::ReciprocalPower { .. });
    match set {
        SetExpr::Powers { base } if harmonic_like => Some(format!("weights on powers of {base} decay geometrically")),
        SetExpr::Squares if matches!(weight, WeightFn::Reciprocal { shift } if *shift >= 1)
            || matches!(weight, WeightFn::ReciprocalPower { shift, .. } if *shift >= 1) =>
        {
            Some("Σ 1/(k² + s) converges".into())
        }
        SetExpr::Annotated { set, summable: Some(true), justification, .. } => {
            Some(format!("annotation: {justification}")).or_else(|| converges_by_construction(weight, set))
        }
        SetExpr::Annotated { set, .. } => converges_by_construction(weight, set),
        _ => None,
    }
}

fn summable(weight: &WeightFn, set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    let threshold = weight_scale(weight)? * num::from_u64(effort.divergence_factor);
    let cw = effort.check_window.max(16);
    if let Some(reason) = converges_by_construction(weight, set) {
        if let SetExpr::Annotated { summable: Some(true), .. } = set {
            let s = sum_range(weight, set, 0, cw)?;
            if s.lower > threshold {
                return Err(Error::Annotation(format!(
                    "summable annotation rejected: partial sum below {cw} exceeds {}",
                    num::fmt_rational(&threshold)
                )));
            }
        }
        return Ok(Verdict::ProvenIn { certificate: Certificate::structural(reason), effort: e });
    }
    // dyadic increments Δ_j = Σ over A ∩ [2^j, 2^{j+1})
    let top = 63 - cw.leading_zeros() as u64;
    let mut total = sum_range(weight, set, 0, 1)?.lower;
    let mut increments = Vec::new();
    for j in 0..top {
        let part = sum_range(weight, set, 1 << j, 1 << (j + 1))?;
        total += &part.lower;
        increments.push(part);
    }
    let bound = 1u64 << top;
    if total > threshold {
        return Ok(Verdict::EvidenceOut {
            strength: bound,
            detail: format!("partial sum exceeds {}", num::fmt_rational(&threshold)),
            witness: Some(Witness::Divergence { bound, partial_sum_lower: total, detail: "threshold".into() }),
            effort: e,
        });
    }
    if increments.len() < 8 {
        return Ok(Verdict::Unknown { detail: "window too small for a trend".into(), effort: e });
    }
    let last = &increments[increments.len() - 1];
    let early = &increments[increments.len() - 8];
    if last.upper.is_zero() && early.upper.is_zero() {
        return Ok(Verdict::EvidenceIn { strength: bound, detail: "no weight in the last dyadic blocks".into(), effort: e });
    }
    if !early.upper.is_zero() && last.lower.clone() / &early.upper >= rat_u(1, 2) {
        return Ok(Verdict::EvidenceOut {
            strength: bound,
            detail: "dyadic increments are not decaying".into(),
            witness: Some(Witness::Divergence { bound, partial_sum_lower: total, detail: "stable dyadic increments".into() }),
            effort: e,
        });
    }
    if !early.lower.is_zero() && last.upper.clone() / &early.lower <= rat_u(1, 8) {
        return Ok(Verdict::EvidenceIn {
            strength: bound,
            detail: format!("dyadic increments decay; partial sum {}", num::fmt_rational(&num::round_down(&total))),
            effort: e,
        });
    }
    Ok(Verdict::Unknown { detail: "dyadic increments neither stable nor decaying".into(), effort: e })
}

fn erdos_ulam(weight: &WeightFn, set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let WeightFn::Constant { .. } = weight {
        return density_zero(set, effort, Some("constant weights give density zero"));
    }
    let cps = crate::measures::dyadic_checkpoints(effort.check_window);
    let tail = &cps[cps.len() / 2..];
    let (mut max_lo, mut max_hi) = (Rational::zero(), Rational::zero());
    for &n in tail {
        let (lo, hi) = eu_ratio_bounds(weight, set, n)?;
        if lo > max_lo {
            max_lo = lo;
        }
        if hi > max_hi {
            max_hi = hi;
        }
    }
    let bound = effort.check_window;
    if max_lo >= level() {
        Ok(Verdict::EvidenceOut {
            strength: bound,
            detail: format!("normalized weight ratio reaches {}", num::fmt_rational(&num::round_down(&max_lo))),
            witness: None,
            effort: e,
        })
    } else if max_hi < level() {
        Ok(Verdict::EvidenceIn {
            strength: bound,
            detail: format!("normalized weight ratio stays below {}", num::fmt_rational(&num::round_up(&max_hi))),
            effort: e,
        })
    } else {
        Ok(Verdict::Unknown { detail: "normalized ratio enclosure straddles the evidence level".into(), effort: e })
    }
}

/// `lim_n |A ∩ I_n| / |I_n|` when the block rule determines it.
pub(crate) fn farah_limit(set: &SetExpr, schedule: &GridSchedule) -> Option<Rational> {
    match set {
        SetExpr::Empty { .. } => Some(Rational::zero()),
        SetExpr::Annotated { set, .. } => farah_limit(set, schedule),
        SetExpr::BlockRule { schedule: s, rule, blocks: None } if s == schedule => {
            // lengths grow without bound except for custom schedules, which end periodically
            let last = match schedule {
                GridSchedule::Custom { lengths } => Some(*lengths.last()?),
                _ => None,
            };
            let one = Rational::from_integer(1.into());
            match rule {
                BlockRule::All => Some(one),
                BlockRule::Nothing => Some(Rational::zero()),
                BlockRule::First { count } | BlockRule::Last { count } => match count {
                    CountFn::Const { value } => Some(match last {
                        Some(l) => rat_u((*value).min(l), l),
                        None => Rational::zero(),
                    }),
                    CountFn::Fraction { num, den } => Some(match last {
                        Some(l) => rat_u((l * num / den).min(l), l),
                        None => rat_u(*num, *den).min(one),
                    }),
                    _ => None,
                },
                BlockRule::Arithmetic { step } => Some(match last {
                    Some(l) => rat_u(l.div_ceil(*step), l),
                    None => rat_u(1, *step),
                }),
            }
        }
        _ => None,
    }
}

fn farah(schedule: &GridSchedule, set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let Some(v) = farah_limit(set, schedule) {
        if v.is_zero() {
            return Ok(Verdict::ProvenIn {
                certificate: Certificate::structural("block counts stay bounded while block lengths grow"),
                effort: e,
            });
        }
        return Ok(Verdict::ProvenOut {
            witness: Witness::BlockMeasure { value: v, reason: "fixed proportion of every block".into() },
            effort: e,
        });
    }
    let cap = if matches!(schedule, GridSchedule::TwoPowFactorial) { 12 } else { 40 };
    let block_closed = matches!(set, SetExpr::BlockRule { .. });
    let mut measures = Vec::new();
    let mut start = BigUint::zero();
    for n in 0..=cap {
        let len = schedule.length(n);
        let end = &start + &len;
        if !block_closed && end > BigUint::from(effort.check_window) {
            break;
        }
        match set.count_range(&start, &end) {
            Ok(c) => measures.push(rat_big(&c, &len)),
            Err(err) if err.is_effort() => break,
            Err(err) => return Err(err),
        }
        start = end;
    }
    let strength = start.to_u64().unwrap_or(u64::MAX);
    if measures.len() < 4 {
        return Ok(Verdict::Unknown { detail: format!("only {} blocks inside the window", measures.len()), effort: e });
    }
    let tail_max = measures[measures.len() / 2..].iter().max().cloned().expect("nonempty");
    let detail = format!("largest block measure over the last {} blocks: {}", measures.len() - measures.len() / 2, num::fmt_rational(&tail_max));
    if tail_max >= level() {
        Ok(Verdict::EvidenceOut { strength, detail, witness: None, effort: e })
    } else {
        Ok(Verdict::EvidenceIn { strength, detail, effort: e })
    }
}

fn restriction(inner: &IdealDescriptor, carrier: &SetExpr, set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    if let Some(bound) = finite_bound(carrier) {
        return Ok(Verdict::ProvenIn {
            certificate: Certificate::Composite {
                rule: "restriction to a finite carrier contains every subset".into(),
                parts: vec![Certificate::Finite { bound }],
            },
            effort: e,
        });
    }
    let inside = intersect(set, carrier);
    let v = member(inner, &inside, effort)?;
    Ok(match v {
        Verdict::ProvenIn { certificate, effort } => Verdict::ProvenIn {
            certificate: Certificate::Composite { rule: "the part inside the carrier is small".into(), parts: vec![certificate] },
            effort,
        },
        Verdict::ProvenOut { witness, effort } => {
            Verdict::ProvenOut { witness: Witness::Restricted { inner: Box::new(witness) }, effort }
        }
        Verdict::EvidenceOut { strength, detail, witness, effort } => {
            if matches!(inner, IdealDescriptor::DensityZero) {
                let bound = strength.max(1);
                if let Some(value) = relative_density(set, carrier, bound)? {
                    return Ok(Verdict::EvidenceOut {
                        strength,
                        detail: format!("relative density {} in the carrier at {bound}", num::fmt_rational(&value)),
                        witness: Some(Witness::RelativeDensity { bound, value }),
                        effort,
                    });
                }
            }
            Verdict::EvidenceOut { strength, detail, witness: witness.map(|w| Witness::Restricted { inner: Box::new(w) }), effort }
        }
        other => other,
    })
}

fn direct_sum(left: &IdealDescriptor, right: &IdealDescriptor, set: &SetExpr, effort: &Effort) -> Result<Verdict> {
    let e = effort.budget;
    let v0 = wrap_section(0, member(left, &simplify_section(0, set), effort)?, "copy 0 is small");
    let v1 = wrap_section(1, member(right, &simplify_section(1, set), effort)?, "copy 1 is small");
    for v in [&v0, &v1] {
        if let Verdict::ProvenOut { .. } = v {
            return Ok(v.clone());
        }
    }
    match (&v0, &v1) {
        (Verdict::ProvenIn { certificate: a, .. }, Verdict::ProvenIn { certificate: b, .. }) => Ok(Verdict::ProvenIn {
            certificate: Certificate::Composite { rule: "both copies are small".into(), parts: vec![a.clone(), b.clone()] },
            effort: e,
        }),
        (Verdict::EvidenceOut { .. }, _) => Ok(v0),
        (_, Verdict::EvidenceOut { .. }) => Ok(v1),
        (a, b) if a.is_in() && b.is_in() => Ok(Verdict::EvidenceIn {
            strength: a.strength().unwrap_or(u64::MAX).min(b.strength().unwrap_or(u64::MAX)),
            detail: format!("{}; {}", a.summary(), b.summary()),
            effort: e,
        }),
        (a, b) => Ok(Verdict::Unknown { detail: format!("{}; {}", a.summary(), b.summary()), effort: e }),
    }
}

fn fubini(
    outer: &IdealDescriptor,
    inners: &[IdealDescriptor],
    default: &IdealDescriptor,
    set: &SetExpr,
    effort: &Effort,
) -> Result<Verdict> {
    let e = effort.budget;
    let row_effort = effort.for_rows();
    let inner_at = |i: u64| inners.get(i as usize).unwrap_or(default);
    if let (SetExpr::Rectangle { rows, cols }, true) = (set, inners.is_empty()) {
        match member(default, cols, &row_effort)? {
            Verdict::ProvenIn { certificate, .. } => {
                return Ok(Verdict::ProvenIn {
                    certificate: Certificate::Composite { rule: "every row is small".into(), parts: vec![certificate] },
                    effort: e,
                })
            }
            Verdict::ProvenOut { witness: row_witness, .. } => {
                return Ok(match member(outer, rows, effort)? {
                    Verdict::ProvenIn { certificate, .. } => Verdict::ProvenIn {
                        certificate: Certificate::Composite {
                            rule: "the positive rows form a small set".into(),
                            parts: vec![certificate],
                        },
                        effort: e,
                    },
                    Verdict::ProvenOut { witness, .. } => Verdict::ProvenOut {
                        witness: Witness::Rows { row_witness: Box::new(row_witness), outer: Box::new(witness) },
                        effort: e,
                    },
                    Verdict::EvidenceIn { strength, detail, .. } => {
                        Verdict::EvidenceIn { strength, detail: format!("positive rows: {detail}"), effort: e }
                    }
                    Verdict::EvidenceOut { strength, detail, .. } => {
                        Verdict::EvidenceOut { strength, detail: format!("positive rows: {detail}"), witness: None, effort: e }
                    }
                    Verdict::Unknown { detail, .. } => Verdict::Unknown { detail: format!("positive rows: {detail}"), effort: e },
                });
            }
            _ => {}
        }
    }
    if let Some(rb) = row_bound(set) {
        return Ok(Verdict::ProvenIn {
            certificate: Certificate::structural(format!("only rows below {rb} are nonempty")),
            effort: e,
        });
    }
    // rows of images and thinned sets are often sparse, so only the upper
    // half of the sampled rows decides
    let rows = 4 * e.max(1);
    let half = rows / 2;
    let mut bad = Vec::new();
    let mut unknown_late = 0u64;
    for x in 0..rows {
        let v = member(inner_at(x), &simplify_section(x, set), &row_effort)?;
        if v.is_out() {
            bad.push(x);
        } else if !v.is_in() && x >= half {
            unknown_late += 1;
        }
    }
    let late_bad = bad.iter().filter(|&&x| x >= half).count() as u64;
    let detail = format!(
        "{} of the first {rows} rows positive ({late_bad} in the upper half), {unknown_late} undecided in the upper half",
        bad.len()
    );
    if late_bad == 0 && unknown_late == 0 {
        Ok(Verdict::EvidenceIn { strength: rows, detail, effort: e })
    } else if late_bad > 0 && 8 * bad.len() as u64 >= rows {
        Ok(Verdict::EvidenceOut { strength: rows, detail, witness: None, effort: e })
    } else {
        Ok(Verdict::Unknown { detail, effort: e })
    }
}
