use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::WitnessReport;
use crate::error::{Error, Result};
use crate::ideal::{member, Effort, IdealDescriptor, VerdictKind};
use crate::sets::{InjectionExpr, SetExpr};

/// Disjoint pairs `b_k = f(a_k)` with `{a_k} ∩ {b_k} = ∅` and `f(a_k) ≠ a_{k'}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Pairs {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
    /// `a_k ↦ b_k`, identity elsewhere.
    pub restriction: InjectionExpr,
}

impl C1Pairs {
    pub fn report(&self, n: u64) -> WitnessReport {
        let a: HashSet<u64> = self.a.iter().copied().collect();
        let disjoint = self.b.iter().all(|x| !a.contains(x));
        let mut r = WitnessReport::new("c1-extract", json!({ "count": self.a.len(), "window": n }), n);
        r.check("{a_k} and {b_k} are disjoint", disjoint, format!("{} pairs", self.a.len()));
        r.check("a is increasing", self.a.windows(2).all(|w| w[0] < w[1]), "");
        r.with_data(json!({ "a": self.a, "b": self.b }))
    }
}

/// Greedy extraction of `count` pairs from non-fixed points of `f` below `n`.
///
/// `a_k` is the least point that is not fixed, not yet used, not a preimage
/// of an earlier `a`, and whose image is not yet used.
pub fn c1_pair_extraction(f: &InjectionExpr, count: usize, n: u64) -> Result<C1Pairs> {
    let ev = f.evaluator(n)?;
    let mut used: HashSet<u64> = HashSet::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut moved = false;
    for x in 0..n {
        if a.len() == count {
            break;
        }
        let Some(y) = ev.apply(x)? else { continue };
        if y == x {
            continue;
        }
        moved = true;
        if used.contains(&x) || used.contains(&y) {
            continue;
        }
        a.push(x);
        b.push(y);
        used.insert(x);
        used.insert(y);
        if let Some(p) = ev.inverse(x)? {
            used.insert(p);
        }
    }
    if !moved {
        return Err(Error::Precondition(format!("f fixes every point below {n}")));
    }
    if a.len() < count {
        return Err(Error::EffortExceeded(format!("only {} of {count} pairs found below {n}", a.len())));
    }
    let restriction = InjectionExpr::table(a.iter().copied().zip(b.iter().copied()).collect());
    Ok(C1Pairs { a, b, restriction })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C1Branch {
    /// `A′ = (A ∖ B) ∩ f⁻¹[B ∖ A]`
    Prime,
    /// `A″ = (A ∖ B) ∩ f⁻¹[A ∩ B]`
    DoublePrime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Build {
    pub branch: C1Branch,
    pub branch_set: SetExpr,
    pub branch_verdict: VerdictKind,
    /// `f` on the branch, `f⁻¹` on its image, identity elsewhere.
    pub g: InjectionExpr,
    pub window: u64,
    pub report: WitnessReport,
}

fn is_out(ideal: &IdealDescriptor, set: &SetExpr, effort: &Effort) -> Result<(bool, VerdictKind)> {
    let v = member(ideal, set, effort)?;
    Ok((v.is_out(), v.kind()))
}

/// Builds an involution `g` moving a large part of `A ∖ B` into `B`.
///
/// Requires `f[A] ⊆ B` on the window, `A △ B ∉ I` and `A ∖ B ∉ I`; for the
/// other orientation swap the arguments.
pub fn c1_builder(
    a: &SetExpr,
    b: &SetExpr,
    f: &InjectionExpr,
    ideal: &IdealDescriptor,
    effort: &Effort,
    window: u64,
) -> Result<C1Build> {
    let a_minus_b = SetExpr::difference(a.clone(), b.clone());
    let b_minus_a = SetExpr::difference(b.clone(), a.clone());
    let sym = SetExpr::union(vec![a_minus_b.clone(), b_minus_a.clone()]);
    let (out, kind) = is_out(ideal, &sym, effort)?;
    if !out {
        return Err(Error::Precondition(format!("A △ B is not shown to be outside the ideal ({})", kind.label())));
    }
    let (out, kind) = is_out(ideal, &a_minus_b, effort)?;
    if !out {
        return Err(Error::Precondition(format!(
            "A ∖ B is not shown to be outside the ideal ({}); swap A and B",
            kind.label()
        )));
    }
    let ev = f.evaluator(window)?;
    let in_b = b.member_fn(window);
    for x in a.window(window)?.elements {
        if let Some(y) = ev.apply(x)? {
            if !in_b(y)? {
                return Err(Error::Precondition(format!("f({x}) = {y} is not in B")));
            }
        }
    }
    let prime = SetExpr::intersection(vec![a_minus_b.clone(), SetExpr::preimage(f.clone(), b_minus_a)]);
    let double = SetExpr::intersection(vec![
        a_minus_b,
        SetExpr::preimage(f.clone(), SetExpr::intersection(vec![a.clone(), b.clone()])),
    ]);
    let mut chosen = None;
    for (branch, set) in [(C1Branch::Prime, prime), (C1Branch::DoublePrime, double)] {
        let (out, kind) = is_out(ideal, &set, effort)?;
        if out {
            chosen = Some((branch, set, kind));
            break;
        }
    }
    let Some((branch, branch_set, branch_verdict)) = chosen else {
        return Err(Error::Precondition("neither A′ nor A″ is shown to be outside the ideal".into()));
    };
    let g = InjectionExpr::Exchange { domain: Box::new(branch_set.clone()), map: Box::new(f.clone()) };
    let gev = g.evaluator(window)?;
    let dom = branch_set.window(window)?.elements;
    let mut images = HashSet::new();
    let (mut injective, mut moves, mut involution) = (true, true, true);
    let mut undefined = 0u64;
    for x in 0..window {
        let Some(y) = gev.apply(x)? else {
            undefined += 1;
            continue;
        };
        injective &= images.insert(y);
        if let Some(z) = gev.apply(y)? {
            involution &= z == x;
        }
    }
    for &x in &dom {
        moves &= gev.apply(x)? != Some(x);
    }
    let mut report = WitnessReport::new(
        "c1-build",
        json!({ "a": a, "b": b, "f": f, "ideal": ideal, "window": window }),
        window,
    );
    report.check("g is injective on the window", injective, format!("{undefined} points undefined"));
    report.check("g moves every point of the branch", moves, format!("{} branch points", dom.len()));
    report.check("g is an involution on the window", involution, "");
    let report = report.with_data(json!({ "branch": branch, "branch_verdict": branch_verdict, "branch_points": dom.len() }));
    Ok(C1Build { branch, branch_set, branch_verdict, g, window, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_pairs_extracts_even_odd() {
        let p = c1_pair_extraction(&InjectionExpr::SwapPairs, 5, 100).unwrap();
        assert_eq!(p.a, vec![0, 2, 4, 6, 8]);
        assert_eq!(p.b, vec![1, 3, 5, 7, 9]);
    }

    #[test]
    fn successor_skips_used_points() {
        let p = c1_pair_extraction(&InjectionExpr::shift(1), 4, 100).unwrap();
        assert_eq!(p.a, vec![0, 2, 4, 6]);
        assert_eq!(p.b, vec![1, 3, 5, 7]);
    }

    #[test]
    fn identity_is_refused() {
        assert!(matches!(c1_pair_extraction(&InjectionExpr::Identity, 1, 50), Err(Error::Precondition(_))));
        assert!(matches!(c1_pair_extraction(&InjectionExpr::SwapPairs, 100, 50), Err(Error::EffortExceeded(_))));
    }
}
