use std::collections::HashMap;

use num_integer::Integer;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::WitnessReport;
use crate::error::{Error, Result};
use crate::num::{self, factorial, rat_u, Rational};
use crate::sets::{BlockRule, CountFn, GridSchedule, InjectionExpr, SetExpr};

/// Largest block handled element by element (`Σ_{k ≤ 9} k! = 409114` points).
pub const ANTIHOMOG_MAX: u64 = 9;
const LIMIT_CAP: u64 = 1 << 26;

/// Split of one interval `I_n` (`|I_n| = n!`) by where `f` sends its points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntihomogBlock {
    pub n: u64,
    pub len: u64,
    /// `|ω⁺ ∩ I_n|`: `f(x) > max I_n`
    pub plus: u64,
    /// `|ω⁻ ∩ I_n|`: `f(x) < min I_n`
    pub minus: u64,
    /// `|ω⁼ ∩ I_n|`: `f(x) ∈ I_n`
    pub equal: u64,
    #[serde(with = "num::serde_rational")]
    pub phi_minus: Rational,
    /// `φ_n(f[ω⁺])`
    #[serde(with = "num::serde_rational")]
    pub phi_image_plus: Rational,
    #[serde(with = "num::serde_rational")]
    pub phi_plus: Rational,
    /// `Σ_{k<n} k! / n!`, which bounds both `φ_n(ω⁻)` and `φ_n(f[ω⁺])`.
    #[serde(with = "num::serde_rational")]
    pub bound: Rational,
    /// Both quantities are below `2/n` (claimed for `n ≥ 4`).
    pub strict_two_over_n: bool,
    /// Points removed from `I_n` when the target is a proper subset of ω.
    #[serde(default)]
    pub removed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntihomogStats {
    pub n_max: u64,
    pub blocks: Vec<AntihomogBlock>,
    /// `φ_n(ω⁻) ≤ bound` and `φ_n(f[ω⁺]) ≤ bound` on every block.
    pub bounds_hold: bool,
    /// Blocks of the removal set where `ω⁺` keeps mass `≥ 1/(2M)` while
    /// `φ_n(f[ω⁺]) < 2/n`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contradiction_blocks: Vec<u64>,
    pub report: WitnessReport,
}

fn offsets(n_max: u64) -> Vec<u64> {
    let mut out = vec![0u64];
    for n in 0..=n_max {
        let len = factorial(n).to_u64().expect("small factorial");
        out.push(out[n as usize] + len);
    }
    out
}

/// Partition statistics of an injection given pointwise.
pub fn antihomog_partition_fn(f: &dyn Fn(u64) -> Result<Option<u64>>, n_max: u64) -> Result<AntihomogStats> {
    if n_max > ANTIHOMOG_MAX {
        return Err(Error::EffortExceeded(format!("blocks are enumerated only up to n = {ANTIHOMOG_MAX}")));
    }
    let offs = offsets(n_max);
    let end = offs[n_max as usize + 1];
    let mut seen: HashMap<u64, u64> = HashMap::with_capacity(end as usize);
    let mut plus_hits = vec![0u64; n_max as usize + 1];
    let mut rows = Vec::new();
    for n in 0..=n_max {
        let (lo, hi) = (offs[n as usize], offs[n as usize + 1]);
        let (mut plus, mut minus, mut equal) = (0, 0, 0);
        for x in lo..hi {
            let y = f(x)?.ok_or_else(|| Error::EffortExceeded(format!("f({x}) is not available")))?;
            if let Some(prev) = seen.insert(y, x) {
                return Err(Error::Injectivity { first: prev, second: x, image: y });
            }
            if y < lo {
                minus += 1;
            } else if y >= hi {
                plus += 1;
                if y < end {
                    let m = offs.partition_point(|&o| o <= y) - 1;
                    plus_hits[m] += 1;
                }
            } else {
                equal += 1;
            }
        }
        rows.push((n, hi - lo, plus, minus, equal));
    }
    let mut blocks = Vec::new();
    let mut bounds_hold = true;
    for (n, len, plus, minus, equal) in rows {
        let phi_minus = rat_u(minus, len);
        let phi_image_plus = rat_u(plus_hits[n as usize], len);
        let bound = rat_u(offs[n as usize], len);
        let two = rat_u(2, n.max(1));
        bounds_hold &= phi_minus <= bound && phi_image_plus <= bound;
        blocks.push(AntihomogBlock {
            n,
            len,
            plus,
            minus,
            equal,
            strict_two_over_n: phi_minus < two && phi_image_plus < two,
            phi_plus: rat_u(plus, len),
            phi_minus,
            phi_image_plus,
            bound,
            removed: 0,
        });
    }
    let mut report = WitnessReport::new("antihomog", json!({ "n_max": n_max, "schedule": "factorial" }), end);
    report.check("f is injective on the blocks", true, format!("{end} points"));
    report.check("φ_n(ω⁻) and φ_n(f[ω⁺]) are at most Σ_{k<n} k!/n!", bounds_hold, "");
    report.check(
        "φ_n(ω⁻) and φ_n(f[ω⁺]) are below 2/n for n ≥ 4",
        blocks.iter().filter(|b| b.n >= 4).all(|b| b.strict_two_over_n),
        "",
    );
    Ok(AntihomogStats { n_max, blocks, bounds_hold, contradiction_blocks: Vec::new(), report })
}

/// Partition statistics of a symbolic injection.
pub fn antihomog_partition(f: &InjectionExpr, n_max: u64) -> Result<AntihomogStats> {
    let end = offsets(n_max.min(ANTIHOMOG_MAX))[n_max.min(ANTIHOMOG_MAX) as usize + 1];
    let mut limit = 2 * end + 16;
    loop {
        let ev = f.evaluator(limit)?;
        let probe = ev.apply(end.saturating_sub(1))?;
        if probe.is_some() || limit >= LIMIT_CAP {
            let mut stats = antihomog_partition_fn(&|x| ev.apply(x), n_max)?;
            stats.report.parameters = json!({ "n_max": n_max, "schedule": "factorial", "f": f });
            return Ok(stats);
        }
        limit *= 4;
    }
}

/// For the target `A = ω ∖ ⋃_{n ∈ T} A_n`, `A_n` the first `n!/M` points of
/// `I_n`, runs the partition on the enumeration `f : ω → A` and reports the
/// blocks where the contradiction of the argument is visible.
pub fn removal_refuter(t: &[u64], m: u64, n_max: u64) -> Result<AntihomogStats> {
    if m == 0 {
        return Err(Error::Precondition("M must be positive".into()));
    }
    let removed = SetExpr::block_rule_on(
        GridSchedule::Factorial,
        BlockRule::First { count: CountFn::Fraction { num: 1, den: m } },
        SetExpr::explicit(t.iter().copied()),
    );
    let a = SetExpr::complement(removed.clone());
    let f = InjectionExpr::enumeration(a.clone());
    let mut stats = antihomog_partition(&f, n_max)?;
    let offs = offsets(n_max);
    let half_m = rat_u(1, 2 * m);
    let mut contradiction = Vec::new();
    for b in &mut stats.blocks {
        let lo = offs[b.n as usize].into();
        let hi = offs[b.n as usize + 1].into();
        b.removed = removed.count_range(&lo, &hi)?.to_u64().expect("small");
        if t.contains(&b.n) && b.phi_plus >= half_m && b.phi_image_plus < rat_u(2, b.n.max(1)) {
            contradiction.push(b.n);
        }
    }
    // points of I_n staying in I_n land in A ∩ I_n, so ω⁺ ∪ ω⁻ keeps the removed mass
    let forced = stats.blocks.iter().all(|b| b.plus + b.minus >= b.removed);
    stats.report.parameters = json!({ "t": t, "m": m, "n_max": n_max, "target": a });
    stats.report.check("|ω⁺ ∩ I_n| + |ω⁻ ∩ I_n| ≥ |A_n| on every block", forced, "");
    stats.report.data = json!({ "contradiction_blocks": contradiction });
    stats.contradiction_blocks = contradiction;
    Ok(stats)
}

/// Injection on the factorial blocks: blocks below `start_block` are permuted
/// in place by `x ↦ min I_n + (a·(x − min I_n) + c) mod |I_n|`, later blocks
/// are sent into `I_{n+1}` by the same rule modulo `|I_{n+1}|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMap {
    pub start_block: u64,
    /// `(a, c)` per block, `gcd(a, modulus) = 1`.
    pub params: Vec<(u64, u64)>,
    offsets: Vec<u64>,
}

impl BlockMap {
    pub fn random<R: Rng>(rng: &mut R, n_max: u64) -> Self {
        let offsets = offsets(n_max + 1);
        let start_block = rng.gen_range(0..=n_max + 1);
        let params = (0..=n_max)
            .map(|n| {
                let target = if n < start_block { n } else { n + 1 };
                let modulus = offsets[target as usize + 1] - offsets[target as usize];
                let mut a = rng.gen_range(1..=modulus);
                while a.gcd(&modulus) != 1 {
                    a = rng.gen_range(1..=modulus);
                }
                (a, rng.gen_range(0..modulus))
            })
            .collect();
        BlockMap { start_block, params, offsets }
    }

    pub fn apply(&self, x: u64) -> Option<u64> {
        let n = self.offsets.partition_point(|&o| o <= x).checked_sub(1)?;
        let (a, c) = *self.params.get(n)?;
        let target = if (n as u64) < self.start_block { n } else { n + 1 };
        let lo = self.offsets[target];
        let modulus = self.offsets[target + 1] - lo;
        let r = (a as u128 * (x - self.offsets[n]) as u128 + c as u128) % modulus as u128;
        Some(lo + r as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_all_equal() {
        let s = antihomog_partition(&InjectionExpr::Identity, 6).unwrap();
        assert!(s.blocks.iter().all(|b| b.plus == 0 && b.minus == 0 && b.equal == b.len));
        assert!(s.report.passed());
    }

    #[test]
    fn bound_matches_factorial_sums() {
        let s = antihomog_partition(&InjectionExpr::Identity, 5).unwrap();
        // Σ_{k<3} k! / 3! = 4/6
        assert_eq!(s.blocks[3].bound, rat_u(2, 3));
        assert_eq!(s.blocks[5].bound, rat_u(34, 120));
    }

    #[test]
    fn refuter_with_half_removed() {
        let s = removal_refuter(&[5, 6, 7], 2, 7).unwrap();
        assert_eq!(s.blocks[6].removed, 360);
        assert_eq!(s.contradiction_blocks, vec![5, 6, 7]);
        assert!(s.report.passed(), "{:?}", s.report.counterexample);
    }

    #[test]
    fn random_block_maps_are_injective() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let m = BlockMap::random(&mut rng, 6);
            let s = antihomog_partition_fn(&|x| Ok(m.apply(x)), 6).unwrap();
            assert!(s.blocks.iter().all(|b| b.minus == 0));
            assert!(s.report.passed(), "{:?}", s.report.counterexample);
        }
    }
}
