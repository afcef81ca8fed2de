use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::WitnessReport;
use crate::error::{Error, Result};
use crate::measures::weight::block_value;
use crate::measures::{abel_dini, eu_ratio, AbelDiniReport, BlockValue, WeightFn};
use crate::num::{self, factorial, from_uint, pow2, rat_u, round_nearest, Rational};
use crate::sets::{block_counts, kn, BlockRule, Coeff, CountFn, GridSchedule, InjectionExpr, SetExpr};

/// Largest `n` for which `(2^n)!` is still evaluated exactly.
pub const EU_NONDENSE_MAX: u64 = 12;
/// Largest block index of the dense construction.
pub const EU_DENSE_MAX: u64 = 40;
const CROSS_CHECK_MAX: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondenseBlock {
    pub n: u64,
    /// `h(A ∩ [0, max I_n]) / h([0, max I_n])` for `A = {max I_m}`.
    #[serde(with = "num::serde_rational")]
    pub ratio_a: Rational,
    /// `n / (2^n)!`
    #[serde(with = "num::serde_rational")]
    pub bound_a: Rational,
    /// `None` below `n = 2`, where the bound is not claimed.
    pub a_ok: Option<bool>,
    /// Same ratio for `f[A] = A + 1` at `min I_{n+1}`.
    #[serde(with = "num::serde_rational")]
    pub ratio_image: Rational,
    /// `(2^{n+1})! / ((2^{n+1})! + n·((2^n)!)²)`
    #[serde(with = "num::serde_rational")]
    pub bound_image: Rational,
    pub image_ok: Option<bool>,
    pub ratio_a_approx: f64,
    pub ratio_image_approx: f64,
    /// Agreement with the generic weighted-ratio evaluator, for small `n`.
    pub cross_checked: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuNondense {
    pub n_max: u64,
    pub blocks: Vec<NondenseBlock>,
    /// `A ∈ EU_h` while `f[A] ∉ EU_h` on every checked block, so `n ↦ n + 1`
    /// is not bi-invariant for `EU_h`; the shift is bi-invariant for every
    /// summable ideal with a monotone weight.
    pub shift_not_biinvariant: bool,
    pub report: WitnessReport,
}

/// `|I_n| = (2^n)!`, `h = (2^n)!` on `I_n`, `A = {max I_n}`, `f(n) = n + 1`.
pub fn eu_nondense_counterexample(n_max: u64) -> Result<EuNondense> {
    if n_max > EU_NONDENSE_MAX {
        return Err(Error::EffortExceeded(format!(
            "(2^n)! is evaluated exactly only up to n = {EU_NONDENSE_MAX}"
        )));
    }
    let lens: Vec<BigUint> = (0..=n_max + 1).map(|m| factorial(1 << m)).collect();
    let schedule = GridSchedule::TwoPowFactorial;
    let a_set = SetExpr::block_rule(schedule.clone(), BlockRule::Last { count: CountFn::Const { value: 1 } });
    let image = SetExpr::image(InjectionExpr::shift(1), a_set.clone());
    let h = WeightFn::PerBlock { schedule: schedule.clone(), value: BlockValue::BlockLength };
    let mut blocks = Vec::new();
    let mut a_sum = BigUint::zero();
    let mut sq_sum = BigUint::zero();
    for n in 0..=n_max {
        a_sum += &lens[n as usize];
        sq_sum += &lens[n as usize] * &lens[n as usize];
        let ratio_a = Rational::new(a_sum.clone().into(), sq_sum.clone().into());
        let bound_a = Rational::new(n.into(), lens[n as usize].clone().into());
        let next = &lens[n as usize + 1];
        // image points are min I_m for m ≥ 1
        let img_sum = &a_sum - 1u8 + next;
        let ratio_image = Rational::new(img_sum.into(), (&sq_sum + next).into());
        let bound_image = Rational::new(
            next.clone().into(),
            (next + BigUint::from(n) * &lens[n as usize] * &lens[n as usize]).into(),
        );
        let cross_checked = if n <= CROSS_CHECK_MAX {
            let at_max = num::to_u64(&schedule.offset(n + 1)).expect("small block");
            let ea = eu_ratio(&h, &a_set, at_max)?;
            let eb = eu_ratio(&h, &image, at_max + 1)?;
            Some(ea == ratio_a && eb == ratio_image)
        } else {
            None
        };
        blocks.push(NondenseBlock {
            n,
            a_ok: (n >= 2).then(|| ratio_a <= bound_a),
            image_ok: (n >= 1).then(|| ratio_image >= bound_image),
            ratio_a_approx: num::approx(&ratio_a),
            ratio_image_approx: num::approx(&ratio_image),
            ratio_a,
            bound_a,
            ratio_image,
            bound_image,
            cross_checked,
        });
    }
    let half = rat_u(1, 2);
    let claimed = blocks.iter().filter(|b| b.n >= 2);
    let shift_not_biinvariant = n_max >= 2
        && claimed.clone().all(|b| b.a_ok == Some(true) && b.image_ok == Some(true) && b.ratio_image > half);
    let mut report = WitnessReport::new("eu-nondense", json!({ "n_max": n_max }), n_max);
    report.check(
        "ratio for A stays below n/(2^n)! for n ≥ 2",
        claimed.clone().all(|b| b.a_ok == Some(true)),
        format!("{} blocks", blocks.len()),
    );
    report.check(
        "ratio for f[A] stays above the lower bound for n ≥ 1",
        blocks.iter().all(|b| b.image_ok != Some(false)),
        "",
    );
    report.check(
        "closed forms agree with the weighted-ratio evaluator",
        blocks.iter().all(|b| b.cross_checked != Some(false)),
        format!("checked for n ≤ {}", CROSS_CHECK_MAX.min(n_max)),
    );
    let report = report.with_data(json!({
        "ratio_a": blocks.iter().map(|b| b.ratio_a_approx).collect::<Vec<_>>(),
        "ratio_image": blocks.iter().map(|b| b.ratio_image_approx).collect::<Vec<_>>(),
    }));
    Ok(EuNondense { n_max, blocks, shift_not_biinvariant, report })
}

/// Inputs of the two cases of the dense construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum DenseCase {
    /// `B_b ∈ J` for the given `b ∈ (0, 1]`.
    One {
        #[serde(with = "num::serde_rational")]
        b: Rational,
    },
    /// `B_b ∉ J` for every `b`; needs the representing weight `g`,
    /// constant on each interval, and the thinning sequence `b_n`.
    Two { g: Option<BlockValue>, b: Coeff },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseBlock {
    pub n: u64,
    pub k: u64,
    /// `2^{k_n} ≥ n·2^{k_{n-1}}` and `k_n` is the least such exponent.
    pub kn_ok: bool,
    /// `h(i) / ω_h[1, i]` at `i = min I_n`.
    #[serde(with = "num::serde_rational")]
    pub density_ratio: Rational,
    /// `2n / 2^{k_{n-1}}`, claimed for `n ≥ 2`.
    #[serde(with = "num::serde_rational_opt")]
    pub density_bound: Option<Rational>,
    /// `A_h(I_{n+1}) / ω_h(I_n)` for `A` the first `[a_n 2^{k_n}]` points of each `I_{n+1}`, `a_n = 1/2`.
    #[serde(with = "num::serde_rational")]
    pub eq1_half: Rational,
    /// Same with `a_n = 1/n`.
    #[serde(with = "num::serde_rational")]
    pub eq1_reciprocal: Rational,
    /// `a_n·(n+1)/n` for `a_n = 1/2`.
    #[serde(with = "num::serde_rational")]
    pub eq1_half_approx: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseCase1 {
    #[serde(with = "num::serde_rational")]
    pub b: Rational,
    pub c: SetExpr,
    /// `C_h(I_n) / ω_h(I_n)` per block.
    #[serde(with = "num::rational_vec")]
    pub ratios: Vec<Rational>,
    /// First `n` from which `C_h(I_n)/ω_h(I_n) ≤ b/n` holds on every checked block.
    pub ratio_bound_from: Option<u64>,
    /// `x ↦ 2^{k_{n+1}} + (x − min(C ∩ I_n))` from `min(C ∩ I_n)` on, for blocks representable in u64.
    pub f: InjectionExpr,
    /// Blocks on which `f[C] ∩ I_{n+1}` was compared pointwise with the first `[b·2^{k_n}]` points.
    pub pointwise_blocks: Vec<u64>,
    pub pointwise_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseCase2 {
    pub g: BlockValue,
    pub b: Coeff,
    /// `|B ∩ I_n| / g_n`
    #[serde(with = "num::rational_vec")]
    pub x: Vec<Rational>,
    /// `g_{n+1} / g_n`
    #[serde(with = "num::rational_vec")]
    pub m: Vec<Rational>,
    #[serde(with = "num::rational_vec")]
    pub c: Vec<Rational>,
    /// `S_n = Σ_{m ≤ n} c_m X_m`
    #[serde(with = "num::rational_vec")]
    pub s: Vec<Rational>,
    pub square_ok: bool,
    /// `Σ c_n X_n / M_n`, the mass of `f[C]` in `J`.
    #[serde(with = "num::serde_rational")]
    pub image_mass: Rational,
    /// `f(min(C ∩ I_n)) = 2^{k_{n+1}} + [b_n 2^{k_n}] + [(1 − c_n)|B ∩ I_n|]`, decimal.
    pub f_values: Vec<String>,
    /// Abel–Dini partial sums over the positive increments `c_n X_n`, `δ = 1`.
    pub abel_dini: Option<AbelDiniReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuDense {
    pub n_max: u64,
    pub blocks: Vec<DenseBlock>,
    pub case1: Option<DenseCase1>,
    pub case2: Option<DenseCase2>,
    pub report: WitnessReport,
}

fn pow2r(e: u64) -> Rational {
    from_uint(&pow2(e))
}

/// `[x]`, clamped at zero.
fn nearest(x: &Rational) -> BigUint {
    round_nearest(x).to_biguint().unwrap_or_default()
}

/// `ω_h[1, i]` at `i = min I_n`, over positions `1..=min I_n`.
fn weight_through_min(n: u64) -> BigUint {
    let mut total = BigUint::zero();
    for m in 1..n {
        total += pow2(kn(m)) * (pow2(kn(m + 1)) - pow2(kn(m)));
    }
    total + pow2(kn(n))
}

fn eq1_ratio(count: &BigUint, n: u64) -> Rational {
    let (kn0, kn1) = (pow2(kn(n)), pow2(kn(n + 1)));
    Rational::new((count * &kn1).into(), (&kn0 * (&kn1 - &kn0)).into())
}

/// The dense Erdős–Ulam ideal `EU_h` with `h = 2^{k_n}` on `I_n = [2^{k_n}, 2^{k_{n+1}})`.
pub fn eu_dense_counterexample(n_max: u64, case: &DenseCase) -> Result<EuDense> {
    if n_max > EU_DENSE_MAX {
        return Err(Error::EffortExceeded(format!("block arithmetic is limited to n ≤ {EU_DENSE_MAX}")));
    }
    let schedule = GridSchedule::DyadicKn;
    let first = |coeff: Coeff| {
        SetExpr::block_rule(schedule.clone(), BlockRule::First { count: CountFn::ScaledPow2Kn { coeff, lag: 1 } })
    };
    let half_counts = block_counts(&first(Coeff::Const { value: rat_u(1, 2) }), &schedule, n_max + 1)?;
    let recip_counts = block_counts(&first(Coeff::Reciprocal), &schedule, n_max + 1)?;
    let mut blocks = Vec::new();
    for n in 0..=n_max {
        let k = kn(n);
        let kn_ok = n == 0
            || (pow2(k) >= BigUint::from(n) * pow2(kn(n - 1))
                && (k == 0 || pow2(k - 1) < BigUint::from(n) * pow2(kn(n - 1))));
        let density_ratio = Rational::new(pow2(k).into(), weight_through_min(n.max(1)).into());
        let density_bound = (n >= 2).then(|| rat_u(2 * n, 1) / pow2r(kn(n - 1)));
        let idx = n as usize + 1;
        // I_{n+1} is long enough for the rounded counts from n = 1 on
        let half = if n >= 1 { eq1_ratio(&half_counts[idx], n) } else { Rational::zero() };
        let recip = if n >= 1 { eq1_ratio(&recip_counts[idx], n) } else { Rational::zero() };
        blocks.push(DenseBlock {
            n,
            k,
            kn_ok,
            density_ratio,
            density_bound,
            eq1_half: half,
            eq1_reciprocal: recip,
            eq1_half_approx: rat_u(n + 1, 2 * n.max(1)),
        });
    }
    let mut report = WitnessReport::new("eu-dense", json!({ "n_max": n_max, "case": case }), n_max);
    report.check(
        "k_n is the least exponent with 2^{k_n} ≥ n·2^{k_{n-1}}",
        blocks.iter().all(|b| b.kn_ok),
        format!("k = {:?}", blocks.iter().map(|b| b.k).collect::<Vec<_>>()),
    );
    report.check(
        "h(i)/ω_h[1,i] ≤ 2n/2^{k_{n-1}} at min I_n for n ≥ 2",
        blocks.iter().all(|b| b.density_bound.as_ref().is_none_or(|d| &b.density_ratio <= d)),
        "",
    );
    let third = rat_u(1, 3);
    report.check(
        "a_n = 1/2 keeps the block ratio above 1/3",
        blocks.iter().filter(|b| b.n >= 1).all(|b| b.eq1_half > third),
        "",
    );
    let small = rat_u(1, 32);
    let drops = blocks.iter().find(|b| b.n >= 1 && b.eq1_reciprocal < small).map(|b| b.n);
    if n_max >= EU_DENSE_MAX {
        report.check(
            "a_n = 1/n drives the block ratio below 1/32",
            drops.is_some(),
            format!("first block below 1/32: {drops:?}"),
        );
    }
    let (case1, case2) = match case {
        DenseCase::One { b } => (Some(dense_case1(b, n_max, &mut report)?), None),
        DenseCase::Two { g, b } => {
            let Some(g) = g else {
                return Err(Error::Precondition("case 2 needs a representing weight g".into()));
            };
            (None, Some(dense_case2(g, b, n_max, &mut report)?))
        }
    };
    let report = report.with_data(json!({ "first_reciprocal_below_1_32": drops }));
    Ok(EuDense { n_max, blocks, case1, case2, report })
}

/// Blocks whose `f` segment still fits in u64.
const U64_BITS: u64 = 63;
/// Blocks with `2^{k_{n+2}}` up to this size are checked pointwise.
const POINTWISE_LIMIT: u64 = 1 << 20;

fn dense_case1(b: &Rational, n_max: u64, report: &mut WitnessReport) -> Result<DenseCase1> {
    if *b <= Rational::zero() || *b > Rational::one() {
        return Err(Error::Precondition("b must lie in (0, 1]".into()));
    }
    let schedule = GridSchedule::DyadicKn;
    let c = SetExpr::block_rule(
        schedule.clone(),
        BlockRule::Last { count: CountFn::ScaledPow2Kn { coeff: Coeff::Const { value: b.clone() }, lag: 0 } },
    );
    let counts = block_counts(&c, &schedule, n_max)?;
    let mut ratios = Vec::new();
    let mut ratio_bound_from = Some(1);
    for n in 1..=n_max {
        let len = pow2(kn(n + 1)) - pow2(kn(n));
        let r = Rational::new(counts[n as usize].clone().into(), len.into());
        if r > b / rat_u(n, 1) {
            ratio_bound_from = if n == n_max { None } else { Some(n + 1) };
        }
        ratios.push(r);
    }
    let mut segments = Vec::new();
    for n in 1..=n_max {
        if kn(n + 1) > U64_BITS || counts[n as usize].is_zero() {
            continue;
        }
        let end = pow2(kn(n + 1));
        let start = (&end - &counts[n as usize]).to_u64().expect("below 2^63");
        segments.push((start, end.to_u64().expect("below 2^63")));
    }
    let f = InjectionExpr::Segments { segments };
    let ev = f.evaluator(0)?;
    let mut pointwise_blocks = Vec::new();
    let mut pointwise_ok = true;
    for n in 1..n_max {
        if kn(n + 2) > U64_BITS || pow2(kn(n + 2)) > BigUint::from(POINTWISE_LIMIT) {
            break;
        }
        let lo = pow2(kn(n)).to_u64().expect("small");
        let hi = pow2(kn(n + 1)).to_u64().expect("small");
        let next_hi = pow2(kn(n + 2)).to_u64().expect("small");
        let want = num::to_u64(&counts[n as usize]).expect("small");
        let mut got = Vec::new();
        let members = c.member_fn(next_hi);
        for x in lo..next_hi {
            if members(x)? {
                if let Some(y) = ev.apply(x)? {
                    if (hi..next_hi).contains(&y) {
                        got.push(y);
                    }
                }
            }
        }
        got.sort_unstable();
        pointwise_ok &= got == (hi..hi + want).collect::<Vec<_>>();
        pointwise_blocks.push(n);
    }
    report.check(
        "C_h(I_n)/ω_h(I_n) ≤ b/n from some block on",
        ratio_bound_from.is_some(),
        format!("from n = {ratio_bound_from:?}"),
    );
    report.check(
        "f[C] ∩ I_{n+1} is the first [b·2^{k_n}] points",
        pointwise_ok,
        format!("blocks {pointwise_blocks:?}"),
    );
    Ok(DenseCase1 { b: b.clone(), c, ratios, ratio_bound_from, f, pointwise_blocks, pointwise_ok })
}

fn floor_sqrt(r: &Rational) -> Rational {
    let fl = r.floor().to_integer().to_biguint().unwrap_or_default();
    Rational::from_integer(num_integer::Roots::sqrt(&fl).into())
}

fn dense_case2(g: &BlockValue, b: &Coeff, n_max: u64, report: &mut WitnessReport) -> Result<DenseCase2> {
    let schedule = GridSchedule::DyadicKn;
    let gv = |n: u64| block_value(&schedule, g, n);
    for n in 0..=n_max + 1 {
        if gv(n) <= Rational::zero() {
            return Err(Error::DegenerateWeight(format!("g vanishes on block {n}")));
        }
        if n > 0 && gv(n) < gv(n - 1) {
            return Err(Error::Precondition(format!("g decreases between blocks {} and {n}", n - 1)));
        }
    }
    let (mut x, mut m, mut c, mut s) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut f_values = Vec::new();
    let mut total = Rational::zero();
    let mut image_mass = Rational::zero();
    let mut square_ok = true;
    for n in 1..=n_max {
        let len = pow2(kn(n + 1)) - pow2(kn(n));
        let count = nearest(&(b.at(n) * pow2r(kn(n)))).min(len);
        let xn = from_uint(&count) / gv(n);
        let mn = gv(n + 1) / gv(n);
        let room = floor_sqrt(&mn) - &total;
        let cn = if xn.is_zero() || room <= Rational::zero() {
            Rational::zero()
        } else {
            (room / &xn).min(Rational::one())
        };
        total += &cn * &xn;
        image_mass += &cn * &xn / &mn;
        square_ok &= &total * &total <= mn;
        let kept = nearest(&((Rational::one() - &cn) * from_uint(&count)));
        let fv = pow2(kn(n + 1)) + nearest(&(b.at(n) * pow2r(kn(n)))) + kept;
        f_values.push(fv.to_string());
        x.push(xn);
        m.push(mn);
        c.push(cn);
        s.push(total.clone());
    }
    let increments: Vec<Rational> =
        c.iter().zip(&x).map(|(ci, xi)| ci * xi).filter(|v| *v > Rational::zero()).collect();
    let abel = if increments.is_empty() {
        None
    } else {
        let mut values = vec![Rational::one()];
        values.extend(increments.iter().cloned());
        let w = WeightFn::PerBlock { schedule: GridSchedule::Custom { lengths: vec![1] }, value: BlockValue::Table { values } };
        Some(abel_dini(&w, &Rational::one(), increments.len() as u64)?)
    };
    report.check("S_n² ≤ M_n on every block", square_ok, format!("S = {}", s.last().map(num::fmt_rational).unwrap_or_default()));
    report.check(
        "Σ c_n X_n / M_n stays below Σ c_n X_n",
        image_mass <= total,
        format!("{} vs {}", num::approx(&image_mass), num::approx(&total)),
    );
    Ok(DenseCase2 {
        g: g.clone(),
        b: b.clone(),
        x,
        m,
        c,
        s,
        square_ok,
        image_mass,
        f_values,
        abel_dini: abel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nondense_bounds_at_three() {
        let r = eu_nondense_counterexample(3).unwrap();
        let b = &r.blocks[3];
        assert!(b.ratio_a <= rat_u(3, 40320));
        let lower = Rational::new(factorial(16).into(), (factorial(16) + BigUint::from(3u8) * factorial(8) * factorial(8)).into());
        assert!(b.ratio_image >= lower);
        assert!(lower > rat_u(999, 1000));
        assert!(r.blocks.iter().all(|b| b.cross_checked == Some(true)));
        assert!(r.report.passed());
    }

    #[test]
    fn nondense_bound_fails_at_one() {
        let r = eu_nondense_counterexample(2).unwrap();
        assert_eq!(r.blocks[1].ratio_a, rat_u(3, 5));
        assert!(r.blocks[1].ratio_a > r.blocks[1].bound_a);
        assert_eq!(r.blocks[1].a_ok, None);
    }

    #[test]
    fn dense_case1_shift() {
        let r = eu_dense_counterexample(10, &DenseCase::One { b: Rational::one() }).unwrap();
        let c1 = r.case1.as_ref().unwrap();
        assert!(c1.pointwise_ok);
        assert!(!c1.pointwise_blocks.is_empty());
        assert!(r.report.passed(), "{:?}", r.report.counterexample);
    }

    #[test]
    fn dense_case2_needs_g() {
        let e = eu_dense_counterexample(5, &DenseCase::Two { g: None, b: Coeff::Reciprocal });
        assert!(matches!(e, Err(Error::Precondition(_))));
        let r = eu_dense_counterexample(12, &DenseCase::Two { g: Some(BlockValue::Pow2Kn), b: Coeff::Reciprocal }).unwrap();
        assert!(r.case2.unwrap().square_ok);
    }
}
