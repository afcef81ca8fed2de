use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use num_bigint::{BigInt, BigUint};
use num_integer::{Integer, Roots};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::expr::{BlockRule, Coeff, CountFn, SetExpr};
use super::injection::{Evaluator, InjectionExpr};
use super::schedule::{kn, GridSchedule};
use super::space::{pair, unpair, BaseSpace};
use crate::error::{Error, Result};
use crate::num::{pow2, round_nearest, Rational};

/// Largest interval enumerated element by element when no closed form exists.
pub const ENUMERATION_CAP: u64 = 1_000_000;
/// Largest bound for which a window is computed by scanning every candidate.
pub const SCAN_CAP: u64 = 1 << 24;
/// Largest generator set for finite-sums enumeration.
pub const FS_CAP: usize = 30;

/// `{x < bound : x ∈ S}`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub bound: u64,
    pub elements: Vec<u64>,
}

impl Window {
    pub fn len(&self) -> usize {
        self.elements.len()
    }
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
    pub fn contains(&self, x: u64) -> bool {
        self.elements.binary_search(&x).is_ok()
    }
    pub fn truncate(&self, bound: u64) -> Window {
        let end = self.elements.partition_point(|&x| x < bound);
        Window { bound: bound.min(self.bound), elements: self.elements[..end].to_vec() }
    }
}

impl CountFn {
    /// Count for block `n` of length `len`, capped at `len`.
    pub fn eval(&self, n: u64, len: &BigUint) -> BigUint {
        let raw = match self {
            CountFn::Const { value } => BigUint::from(*value),
            CountFn::Fraction { num, den } => len * *num / (*den).max(1),
            CountFn::ScaledPow2Kn { coeff, lag } => {
                if n < *lag {
                    BigUint::zero()
                } else {
                    let m = n - lag;
                    let scaled = coeff.at(m) * Rational::from_integer(BigInt::from(pow2(kn(m))));
                    let r = round_nearest(&scaled);
                    if r.is_negative() {
                        BigUint::zero()
                    } else {
                        r.to_biguint().expect("nonnegative")
                    }
                }
            }
            CountFn::Table { counts } => BigUint::from(counts.get(n as usize).copied().unwrap_or(0)),
        };
        raw.min(len.clone())
    }
}

impl Coeff {
    pub fn at(&self, n: u64) -> Rational {
        match self {
            Coeff::Const { value } => value.clone(),
            Coeff::Reciprocal => Rational::new(BigInt::one(), BigInt::from(n.max(1))),
        }
    }
}

/// Positions selected by a rule inside one block, relative to its start.
enum Selection {
    Range(BigUint, BigUint),
    Stride(u64),
}

impl Selection {
    fn of(rule: &BlockRule, n: u64, len: &BigUint) -> Selection {
        match rule {
            BlockRule::All => Selection::Range(BigUint::zero(), len.clone()),
            BlockRule::Nothing => Selection::Range(BigUint::zero(), BigUint::zero()),
            BlockRule::First { count } => Selection::Range(BigUint::zero(), count.eval(n, len)),
            BlockRule::Last { count } => Selection::Range(len - count.eval(n, len), len.clone()),
            BlockRule::Arithmetic { step } => Selection::Stride(*step),
        }
    }

    fn contains(&self, pos: &BigUint) -> bool {
        match self {
            Selection::Range(a, b) => a <= pos && pos < b,
            Selection::Stride(s) => (pos % *s).is_zero(),
        }
    }

    /// Selected positions in `[lo, hi)`, where `hi ≤ len`.
    fn count_in(&self, lo: &BigUint, hi: &BigUint) -> BigUint {
        if lo >= hi {
            return BigUint::zero();
        }
        match self {
            Selection::Range(a, b) => {
                let start = a.max(lo);
                let end = b.min(hi);
                if start < end {
                    end - start
                } else {
                    BigUint::zero()
                }
            }
            Selection::Stride(s) => hi.div_ceil(&BigUint::from(*s)) - lo.div_ceil(&BigUint::from(*s)),
        }
    }
}

/// Per-evaluation cache of compiled injections.
struct Ctx<'a> {
    limit: u64,
    maps: RefCell<HashMap<usize, Rc<Evaluator<'a>>>>,
}

const MAP_LIMIT_CAP: u64 = 1 << 28;

impl<'a> Ctx<'a> {
    fn new(limit: u64) -> Self {
        Ctx { limit: limit.max(64), maps: RefCell::new(HashMap::new()) }
    }

    fn evaluator(&self, map: &'a InjectionExpr) -> Result<Rc<Evaluator<'a>>> {
        let key = map as *const InjectionExpr as usize;
        if let Some(ev) = self.maps.borrow().get(&key) {
            return Ok(ev.clone());
        }
        let ev = Rc::new(map.evaluator(self.limit)?);
        self.maps.borrow_mut().insert(key, ev.clone());
        Ok(ev)
    }

    /// `f(x)`, growing the materialized range of `f` when needed.
    fn apply(&self, map: &'a InjectionExpr, x: u64) -> Result<u64> {
        let mut ev = self.evaluator(map)?;
        loop {
            if let Some(y) = ev.apply(x)? {
                return Ok(y);
            }
            let next = ev.limit().saturating_mul(2);
            if next > MAP_LIMIT_CAP || !needs_materialization(map) {
                return Err(Error::EffortExceeded(format!("image of {x} is not available below {}", ev.limit())));
            }
            let grown = Rc::new(map.evaluator(next)?);
            self.maps.borrow_mut().insert(map as *const InjectionExpr as usize, grown.clone());
            ev = grown;
        }
    }
}

fn needs_materialization(map: &InjectionExpr) -> bool {
    use InjectionExpr::*;
    match map {
        Enumeration { .. } | Matching { .. } => true,
        Table { default, .. } => needs_materialization(default),
        Exchange { map, .. } | FixOn { map, .. } => needs_materialization(map),
        Pairwise { outer, rows, default_row } => {
            needs_materialization(outer) || needs_materialization(default_row) || rows.iter().any(needs_materialization)
        }
        Compose { first, then } => needs_materialization(first) || needs_materialization(then),
        _ => false,
    }
}

fn is_square(x: u64) -> bool {
    let r = x.sqrt();
    r * r == x
}

fn is_power(x: u64, base: u64) -> bool {
    if x == 0 {
        return false;
    }
    let mut v = x;
    while v % base == 0 {
        v /= base;
    }
    v == 1
}

/// Whether `x` is a sum of a nonempty subset of `gens`.
pub fn is_finite_sum(gens: &[u64], x: u64) -> bool {
    let mut sorted: Vec<u64> = gens.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted.dedup();
    let suffix: Vec<u128> = {
        let mut acc = vec![0u128; sorted.len() + 1];
        for i in (0..sorted.len()).rev() {
            acc[i] = acc[i + 1] + sorted[i] as u128;
        }
        acc
    };
    fn go(g: &[u64], suffix: &[u128], i: usize, rest: u128, used: bool) -> bool {
        if rest == 0 {
            return used;
        }
        if i == g.len() || suffix[i] < rest {
            return false;
        }
        if (g[i] as u128) <= rest && go(g, suffix, i + 1, rest - g[i] as u128, true) {
            return true;
        }
        go(g, suffix, i + 1, rest, used)
    }
    if x == 0 {
        // 0 is a finite sum only when 0 is a generator
        return sorted.contains(&0);
    }
    go(&sorted, &suffix, 0, x as u128, false)
}

/// All nonempty-subset sums of `gens` below `bound`, sorted and deduplicated.
pub fn finite_sums(gens: &[u64], bound: u64) -> Result<Vec<u64>> {
    let mut g: Vec<u64> = gens.to_vec();
    g.sort_unstable();
    g.dedup();
    if g.len() > FS_CAP {
        return Err(Error::EffortExceeded(format!("finite sums of {} generators exceed the cap of {FS_CAP}", g.len())));
    }
    let mut sums: Vec<u64> = Vec::new();
    for &x in &g {
        let mut next: Vec<u64> = sums.iter().filter_map(|&s| s.checked_add(x)).filter(|&s| s < bound).collect();
        if x < bound {
            next.push(x);
        }
        sums.extend(next);
        sums.sort_unstable();
        sums.dedup();
    }
    Ok(sums)
}

impl SetExpr {
    /// `{x < bound : x ∈ self}` in the ω-encoding of the base space.
    pub fn window(&self, bound: u64) -> Result<Window> {
        self.space()?;
        let ctx = Ctx::new(bound);
        Ok(Window { bound, elements: window_in(self, bound, &ctx)? })
    }

    pub fn contains(&self, x: u64) -> Result<bool> {
        let ctx = Ctx::new(x.saturating_add(1));
        contains_in(self, x, &ctx)
    }

    /// Membership test for many points sharing one evaluation context.
    pub fn member_fn(&self, limit: u64) -> impl Fn(u64) -> Result<bool> + '_ {
        let ctx = Ctx::new(limit);
        move |x| contains_in(self, x, &ctx)
    }

    pub fn count_below(&self, bound: u64) -> Result<u64> {
        let c = self.count_range(&BigUint::zero(), &BigUint::from(bound))?;
        Ok(c.to_u64().expect("count below a u64 bound fits"))
    }

    /// `|self ∩ [lo, hi)|`, in closed form where the expression allows it.
    pub fn count_range(&self, lo: &BigUint, hi: &BigUint) -> Result<BigUint> {
        if lo >= hi {
            return Ok(BigUint::zero());
        }
        if let Some(c) = count_closed(self, lo, hi)? {
            return Ok(c);
        }
        count_by_scan(self, lo, hi)
    }

    /// Smallest element, if any below `bound`.
    pub fn first_below(&self, bound: u64) -> Result<Option<u64>> {
        let f = self.member_fn(bound);
        for x in 0..bound {
            if f(x)? {
                return Ok(Some(x));
            }
        }
        Ok(None)
    }
}

fn count_by_scan(expr: &SetExpr, lo: &BigUint, hi: &BigUint) -> Result<BigUint> {
    let too_big = || Error::EffortExceeded(format!("no closed-form count on [{lo}, {hi}) and the range is too large to enumerate"));
    let (Some(l), Some(h)) = (lo.to_u64(), hi.to_u64()) else { return Err(too_big()) };
    if h <= SCAN_CAP {
        let w = expr.window(h)?;
        let below = w.elements.partition_point(|&x| x < l);
        return Ok(BigUint::from((w.elements.len() - below) as u64));
    }
    if h - l <= ENUMERATION_CAP {
        expr.space()?;
        let ctx = Ctx::new(h);
        let mut c = 0u64;
        for x in l..h {
            if contains_in(expr, x, &ctx)? {
                c += 1;
            }
        }
        return Ok(BigUint::from(c));
    }
    Err(too_big())
}

fn width(lo: &BigUint, hi: &BigUint) -> BigUint {
    if hi > lo {
        hi - lo
    } else {
        BigUint::zero()
    }
}

fn ceil_sqrt(n: &BigUint) -> BigUint {
    let r = n.sqrt();
    if &(&r * &r) == n {
        r
    } else {
        r + 1u8
    }
}

fn count_closed(expr: &SetExpr, lo: &BigUint, hi: &BigUint) -> Result<Option<BigUint>> {
    use SetExpr::*;
    Ok(Some(match expr {
        Empty { .. } => BigUint::zero(),
        All { .. } => width(lo, hi),
        Explicit { elements, .. } => {
            let mut e = elements.clone();
            e.sort_unstable();
            e.dedup();
            BigUint::from(e.iter().filter(|&&x| lo <= &BigUint::from(x) && &BigUint::from(x) < hi).count())
        }
        Cofinite { excluded, .. } => {
            let mut e = excluded.clone();
            e.sort_unstable();
            e.dedup();
            let inside = e.iter().filter(|&&x| lo <= &BigUint::from(x) && &BigUint::from(x) < hi).count();
            width(lo, hi) - BigUint::from(inside)
        }
        Squares => ceil_sqrt(hi) - ceil_sqrt(lo),
        Powers { base } => {
            let mut c = 0u64;
            let mut p = BigUint::one();
            while &p < hi {
                if &p >= lo {
                    c += 1;
                }
                p *= *base;
            }
            BigUint::from(c)
        }
        Arithmetic { start, step } => {
            let step = BigUint::from(*step as u64);
            let s = BigUint::from(*start);
            let upto = |b: &BigUint| if b > &s { (b - &s).div_ceil(&step) } else { BigUint::zero() };
            upto(hi) - upto(lo)
        }
        BlockRule { schedule, rule, blocks } => return block_rule_count(schedule, rule, blocks.as_deref(), lo, hi),
        Complement { of } => match count_closed(of, lo, hi)? {
            Some(c) => width(lo, hi) - c,
            None => return Ok(None),
        },
        Annotated { set, .. } => return count_closed(set, lo, hi),
        Intersection { of } => {
            let rest: Vec<&SetExpr> = of.iter().filter(|e| !matches!(e, All { .. })).collect();
            match rest.as_slice() {
                [] => width(lo, hi),
                [one] => return count_closed(one, lo, hi),
                _ => return Ok(None),
            }
        }
        Difference { left, right } => {
            let inter = Intersection { of: vec![(**left).clone(), (**right).clone()] };
            match (count_closed(left, lo, hi)?, count_closed(&inter, lo, hi)?) {
                (Some(a), Some(b)) => a - b,
                _ => return Ok(None),
            }
        }
        Image { map, set } => match **map {
            InjectionExpr::Identity => return count_closed(set, lo, hi),
            InjectionExpr::Shift { by } => {
                let by = BigUint::from(by);
                let l = if lo > &by { lo - &by } else { BigUint::zero() };
                let h = if hi > &by { hi - &by } else { return Ok(Some(BigUint::zero())) };
                return count_closed(set, &l, &h);
            }
            _ => return Ok(None),
        },
        Preimage { map, set } => match **map {
            InjectionExpr::Identity => return count_closed(set, lo, hi),
            InjectionExpr::Shift { by } => {
                let by = BigUint::from(by);
                return count_closed(set, &(lo + &by), &(hi + &by));
            }
            _ => return Ok(None),
        },
        _ => return Ok(None),
    }))
}

fn block_rule_count(
    schedule: &GridSchedule,
    rule: &BlockRule,
    blocks: Option<&SetExpr>,
    lo: &BigUint,
    hi: &BigUint,
) -> Result<Option<BigUint>> {
    let mut total = BigUint::zero();
    let mut n = 0u64;
    let mut start = BigUint::zero();
    let block_filter = match blocks {
        Some(b) => Some(b.member_fn(1 << 16)),
        None => None,
    };
    while &start < hi {
        let len = schedule.length(n);
        let end = &start + &len;
        if &end > lo {
            let selected = match &block_filter {
                Some(f) => f(n)?,
                None => true,
            };
            if selected {
                let sel = Selection::of(rule, n, &len);
                let a = if lo > &start { lo - &start } else { BigUint::zero() };
                let b = if hi < &end { hi - &start } else { len.clone() };
                total += sel.count_in(&a, &b);
            }
        }
        start = end;
        n += 1;
    }
    Ok(Some(total))
}

fn window_in<'a>(expr: &'a SetExpr, bound: u64, ctx: &Ctx<'a>) -> Result<Vec<u64>> {
    use SetExpr::*;
    let sorted = |mut v: Vec<u64>| {
        v.retain(|&x| x < bound);
        v.sort_unstable();
        v.dedup();
        v
    };
    Ok(match expr {
        Empty { .. } => Vec::new(),
        Explicit { elements, .. } => sorted(elements.clone()),
        Points { points, space } => sorted(points.iter().map(|p| space.encode(p)).collect::<Result<_>>()?),
        Squares => (0..).map(|k: u64| k * k).take_while(|&s| s < bound).collect(),
        Powers { base } => {
            let mut out = Vec::new();
            let mut p = 1u64;
            while p < bound {
                out.push(p);
                match p.checked_mul(*base) {
                    Some(q) => p = q,
                    None => break,
                }
            }
            out
        }
        Arithmetic { start, step } => {
            let step = *step as usize;
            (*start..bound).step_by(step).collect()
        }
        FsSet { generators } => finite_sums(generators, bound)?,
        BlockRule { schedule, rule, blocks } => {
            let mut out = Vec::new();
            for (n, start, end) in schedule.blocks_below(bound) {
                if let Some(b) = blocks {
                    if !contains_in(b, n, ctx)? {
                        continue;
                    }
                }
                let len = schedule.length(n);
                let sel = Selection::of(rule, n, &len);
                match &sel {
                    Selection::Range(a, b) => {
                        let a = a.to_u64().unwrap_or(u64::MAX).saturating_add(start).min(end);
                        let b = b.to_u64().unwrap_or(u64::MAX).saturating_add(start).min(end);
                        out.extend(a..b);
                    }
                    Selection::Stride(s) => out.extend((start..end).step_by(*s as usize)),
                }
            }
            out
        }
        Union { of } => {
            let mut out = Vec::new();
            for e in of {
                out.extend(window_in(e, bound, ctx)?);
            }
            sorted(out)
        }
        Intersection { of } if !of.is_empty() && !of.iter().all(|e| scan_only(e)) => {
            let pivot = of.iter().position(|e| !scan_only(e)).expect("checked");
            let mut out = window_in(&of[pivot], bound, ctx)?;
            for (i, e) in of.iter().enumerate() {
                if i != pivot {
                    out = filter(out, e, ctx)?;
                }
            }
            out
        }
        Difference { left, right } if !scan_only(left) => {
            let base = window_in(left, bound, ctx)?;
            let mut out = Vec::with_capacity(base.len());
            for x in base {
                if !contains_in(right, x, ctx)? {
                    out.push(x);
                }
            }
            out
        }
        Tagged { copy, set } => {
            window_in(set, bound.saturating_sub(*copy).div_ceil(2), ctx)?.into_iter().map(|x| 2 * x + copy).collect()
        }
        Annotated { set, .. } => window_in(set, bound, ctx)?,
        _ => {
            if bound > SCAN_CAP {
                return Err(Error::EffortExceeded(format!(
                    "window {bound} needs element-wise scanning beyond the cap of {SCAN_CAP}"
                )));
            }
            let mut out = Vec::new();
            for x in 0..bound {
                if contains_in(expr, x, ctx)? {
                    out.push(x);
                }
            }
            out
        }
    })
}

/// Expressions whose window is computed by scanning every candidate.
fn scan_only(expr: &SetExpr) -> bool {
    use SetExpr::*;
    match expr {
        All { .. } | Cofinite { .. } | Complement { .. } | Image { .. } | Preimage { .. } | Section { .. } => true,
        LowerTriangle | Rectangle { .. } | GridCopy { .. } | Subsets { .. } => true,
        Intersection { of } => of.is_empty() || of.iter().all(scan_only),
        Difference { left, .. } => scan_only(left),
        Annotated { set, .. } => scan_only(set),
        _ => false,
    }
}

fn filter<'a>(xs: Vec<u64>, expr: &'a SetExpr, ctx: &Ctx<'a>) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        if contains_in(expr, x, ctx)? {
            out.push(x);
        }
    }
    Ok(out)
}

fn contains_in<'a>(expr: &'a SetExpr, x: u64, ctx: &Ctx<'a>) -> Result<bool> {
    use SetExpr::*;
    Ok(match expr {
        Empty { .. } => false,
        All { .. } => true,
        Explicit { elements, .. } => elements.contains(&x),
        Points { points, space } => {
            for p in points {
                if space.encode(p)? == x {
                    return Ok(true);
                }
            }
            false
        }
        Cofinite { excluded, .. } => !excluded.contains(&x),
        Squares => is_square(x),
        Powers { base } => is_power(x, *base),
        Arithmetic { start, step } => x >= *start && (x - start) % (*step as u64) == 0,
        FsSet { generators } => is_finite_sum(generators, x),
        BlockRule { schedule, rule, blocks } => {
            let pos = schedule.locate(x);
            if let Some(b) = blocks {
                if !contains_in(b, pos.index, ctx)? {
                    return Ok(false);
                }
            }
            Selection::of(rule, pos.index, &pos.len).contains(&BigUint::from(x - pos.start))
        }
        Union { of } => {
            for e in of {
                if contains_in(e, x, ctx)? {
                    return Ok(true);
                }
            }
            false
        }
        Intersection { of } => {
            for e in of {
                if !contains_in(e, x, ctx)? {
                    return Ok(false);
                }
            }
            true
        }
        Difference { left, right } => contains_in(left, x, ctx)? && !contains_in(right, x, ctx)?,
        Complement { of } => !contains_in(of, x, ctx)?,
        Image { map, set } => match ctx.evaluator(map)?.inverse(x)? {
            Some(p) => contains_in(set, p, ctx)?,
            None => false,
        },
        Preimage { map, set } => {
            let y = ctx.apply(map, x)?;
            contains_in(set, y, ctx)?
        }
        Section { at, set } => {
            let code = match set.space()? {
                BaseSpace::TwoCopies => x.checked_mul(2).and_then(|v| v.checked_add(*at)),
                _ => pair(*at, x).ok(),
            };
            match code {
                Some(c) => contains_in(set, c, ctx)?,
                None => false,
            }
        }
        LowerTriangle => {
            let (i, j) = unpair(x);
            i >= j
        }
        Rectangle { rows, cols } => {
            let (i, j) = unpair(x);
            contains_in(rows, i, ctx)? && contains_in(cols, j, ctx)?
        }
        GridCopy { v, alpha, side } => {
            let (i, j) = unpair(x);
            let on_axis = |c: u64, base: u64| {
                c > base && *alpha > 0 && (c - base) % alpha == 0 && (c - base) / alpha <= *side
            };
            on_axis(i, v[0]) && on_axis(j, v[1])
        }
        Tagged { copy, set } => x % 2 == *copy && contains_in(set, x / 2, ctx)?,
        Subsets { n, set } => {
            let super::space::Point::Subset(elems) = BaseSpace::NSubsets { n: *n }.decode(x) else {
                unreachable!("subset space decodes to subsets")
            };
            for e in elems {
                if !contains_in(set, e, ctx)? {
                    return Ok(false);
                }
            }
            true
        }
        Annotated { set, .. } => contains_in(set, x, ctx)?,
    })
}

/// Per-interval counts `|expr ∩ I_n|` for `n ≤ n_max`.
pub fn block_counts(expr: &SetExpr, schedule: &GridSchedule, n_max: u64) -> Result<Vec<BigUint>> {
    expr.space()?;
    schedule.validate()?;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let mut start = BigUint::zero();
    for n in 0..=n_max {
        let end = &start + schedule.length(n);
        let c = expr.count_range(&start, &end).map_err(|e| match e {
            Error::EffortExceeded(_) => Error::EffortExceeded(format!(
                "interval {n} of length {} has no closed-form count and exceeds the enumeration cap",
                schedule.length(n)
            )),
            other => other,
        })?;
        out.push(c);
        start = end;
    }
    Ok(out)
}

/// `{x < bound : f(x) = x}` as an explicit set; rejects maps that are not
/// injective on the window.
pub fn fixed_points(f: &InjectionExpr, bound: u64) -> Result<SetExpr> {
    let ev = f.evaluator(bound.max(64))?;
    let mut seen: HashMap<u64, u64> = HashMap::new();
    let mut fixed = Vec::new();
    for x in 0..bound {
        let Some(y) = ev.apply(x)? else { continue };
        if let Some(prev) = seen.insert(y, x) {
            return Err(Error::Injectivity { first: prev, second: x, image: y });
        }
        if y == x {
            fixed.push(x);
        }
    }
    Ok(SetExpr::explicit(fixed))
}

/// Checks injectivity of `f` on `[0, bound)`; returns the images (None when unavailable).
pub fn images(f: &InjectionExpr, bound: u64, limit: u64) -> Result<Vec<Option<u64>>> {
    let ev = f.evaluator(limit)?;
    let mut seen: HashMap<u64, u64> = HashMap::new();
    let mut out = Vec::with_capacity(bound as usize);
    for x in 0..bound {
        let y = ev.apply(x)?;
        if let Some(y) = y {
            if let Some(prev) = seen.insert(y, x) {
                return Err(Error::Injectivity { first: prev, second: x, image: y });
            }
        }
        out.push(y);
    }
    Ok(out)
}
