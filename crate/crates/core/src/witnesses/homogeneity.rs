use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{window_detail, IsoWitness, WindowCheck, WitnessReport};
use crate::convergence::{idd_biinvariance, IddBiinvariance};
use crate::detectors::find_grid_copy;
use crate::error::{Error, Result};
use crate::ideal::{member, Effort, IdealDescriptor};
use crate::measures::dyadic_checkpoints;
use crate::measures::density::prefix_counts;
use crate::num::{self, rat_u, Rational};
use crate::sets::analysis::known_infinite;
use crate::sets::{pair, unpair, BaseSpace, InjectionExpr, SetExpr};

fn complement_of(a: &SetExpr) -> SetExpr {
    match a {
        SetExpr::Complement { of } => (**of).clone(),
        _ => SetExpr::complement(a.clone()),
    }
}

/// `f : ω → A` fixing `A ∖ B` and matching `B ∪ Aᶜ` onto `B` in increasing order.
///
/// For `I = Fin` the increasing enumeration of `A` is returned directly.
pub fn costar_witness(ideal: &IdealDescriptor, a: &SetExpr, b: &SetExpr, effort: &Effort) -> Result<IsoWitness> {
    ideal.space()?.expect(a.space()?)?;
    if let IdealDescriptor::Fin { .. } = ideal {
        return Ok(IsoWitness::new(
            SetExpr::all(),
            a.clone(),
            InjectionExpr::enumeration(a.clone()),
            "X finite ⇔ f[X] finite",
        ));
    }
    let rest = complement_of(a);
    let v = member(ideal, &rest, effort)?;
    if !matches!(v, crate::ideal::Verdict::ProvenIn { .. }) {
        return Err(Error::Precondition(format!("complement of A is not certified small ({})", v.summary())));
    }
    let v = member(ideal, b, effort)?;
    if !matches!(v, crate::ideal::Verdict::ProvenIn { .. }) {
        return Err(Error::Precondition(format!("B is not certified small ({})", v.summary())));
    }
    let cw = effort.check_window;
    if !known_infinite(b) && b.count_range(&(cw / 2).into(), &cw.into())? == 0u32.into() {
        return Err(Error::Precondition(format!("B has no elements in [{}, {cw})", cw / 2)));
    }
    let in_a = a.member_fn(cw);
    for x in b.window(cw)?.elements {
        if !in_a(x)? {
            return Err(Error::Precondition(format!("{x} lies in B but not in A")));
        }
    }
    let from = SetExpr::union(vec![b.clone(), rest]);
    Ok(IsoWitness::new(
        SetExpr::all(),
        a.clone(),
        InjectionExpr::Matching { from: Box::new(from), to: Box::new(b.clone()) },
        "X ∈ I ⇔ f[X] ∈ I",
    ))
}

/// Result of closing a homogeneity witness for `A` under a superset `B ⊇ A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupersetClosure {
    pub window: u64,
    /// `A′ ∩ [0, window)`: points of `A` whose inverse orbit reaches `B ∖ A` inside `A`.
    pub a_prime: Vec<u64>,
    /// `M ∩ [0, window)` with `M = A′ ∪ (B ∖ A)`.
    pub fixed: Vec<u64>,
    pub phi: IsoWitness,
    pub check: WindowCheck,
    /// `φ = f` off `M` and `φ = id` on `M`, pointwise on the window.
    pub pointwise: bool,
}

impl SupersetClosure {
    pub fn report(&self) -> WitnessReport {
        let mut r = WitnessReport::new(
            "superset",
            json!({ "phi": self.phi, "window": self.window }),
            self.window,
        );
        r.check("bijective onto B on the window", self.check.ok(), window_detail(&self.check));
        r.check("phi agrees with f off M and fixes M", self.pointwise, format!("{} fixed points below the window", self.fixed.len()));
        r.with_data(json!({ "a_prime": self.a_prime, "fixed": self.fixed }))
    }
}

enum Orbit {
    Hits,
    Misses,
}

/// Traces `a, f⁻¹(a), f⁻²(a), …` until it leaves `A`.
fn trace(
    a: u64,
    window: u64,
    in_a: &dyn Fn(u64) -> Result<bool>,
    in_b: &dyn Fn(u64) -> Result<bool>,
    inverse: &dyn Fn(u64) -> Result<Option<u64>>,
    memo: &mut HashMap<u64, bool>,
) -> Result<bool> {
    let mut path = vec![a];
    let mut seen = HashSet::from([a]);
    let mut c = a;
    let result = loop {
        if let Some(&r) = memo.get(&c) {
            break if r { Orbit::Hits } else { Orbit::Misses };
        }
        if !in_a(c)? {
            break if in_b(c)? { Orbit::Hits } else { Orbit::Misses };
        }
        let Some(p) = inverse(c)? else {
            return Err(Error::EffortExceeded(format!("no preimage of {c} available while tracing the orbit of {a}")));
        };
        if p >= window {
            return Err(Error::EffortExceeded(format!("inverse orbit of {a} leaves [0, {window}) at {p}")));
        }
        if !seen.insert(p) {
            // periodic orbit inside A
            break Orbit::Misses;
        }
        path.push(p);
        c = p;
    };
    let hit = matches!(result, Orbit::Hits);
    for x in path {
        if in_a(x)? {
            memo.insert(x, hit);
        }
    }
    Ok(hit)
}

/// Closes a witness `f : ω → A` under the superset `B ⊇ A` on `[0, window)`.
pub fn superset_closure(f: &IsoWitness, b: &SetExpr, window: u64) -> Result<SupersetClosure> {
    let a = &f.target;
    let ev = f.map.evaluator(window)?;
    let a_fn = a.member_fn(window);
    let b_fn = b.member_fn(window);
    let in_a = |x: u64| a_fn(x);
    let in_b = |x: u64| b_fn(x);
    let inverse = |y: u64| ev.inverse(y);
    for x in a.window(window)?.elements {
        if !in_b(x)? {
            return Err(Error::Precondition(format!("{x} lies in A but not in B")));
        }
    }
    let mut memo = HashMap::new();
    let mut a_prime = Vec::new();
    for x in a.window(window)?.elements {
        if trace(x, window, &in_a, &in_b, &inverse, &mut memo)? {
            a_prime.push(x);
        }
    }
    let b_minus_a = SetExpr::difference(b.clone(), a.clone());
    let m = SetExpr::union(vec![SetExpr::explicit(a_prime.iter().copied()), b_minus_a]);
    let fixed = m.window(window)?.elements;
    let phi_map = InjectionExpr::FixOn { fixed: Box::new(m), map: Box::new(f.map.clone()) };
    let phi = IsoWitness::new(f.source.clone(), b.clone(), phi_map, &f.contract);
    let check = phi.check_window(window, window)?;
    let phi_ev = phi.map.evaluator(window)?;
    let fixed_set: HashSet<u64> = fixed.iter().copied().collect();
    let mut pointwise = true;
    for x in 0..window {
        let expect = if fixed_set.contains(&x) { Some(x) } else { ev.apply(x)? };
        if phi_ev.apply(x)? != expect {
            pointwise = false;
            break;
        }
    }
    Ok(SupersetClosure { window, a_prime, fixed, phi, check, pointwise })
}

/// `f(n, m) = a^n_m` from `D` onto points of `A` in increasing columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdFinWitness {
    pub depth: u64,
    /// `k_n`, strictly increasing.
    pub columns: Vec<u64>,
    /// `a^n_m` (encoded), `m ≤ n`.
    pub points: Vec<Vec<u64>>,
    pub iso: IsoWitness,
    /// Diagonal bound `L`: all points with `i + j < L` were inspected.
    pub diagonal: u64,
}

impl EdFinWitness {
    /// `|X ∩ column k_n| = |f⁻¹[X] ∩ column n|` for every `n < depth`.
    pub fn column_transfer(&self, x: &[u64]) -> bool {
        let x: HashSet<u64> = x.iter().copied().collect();
        self.columns.iter().zip(&self.points).enumerate().all(|(n, (&k, pts))| {
            let image_side = x.iter().filter(|&&z| unpair(z).0 == k).count();
            let source_side = (0..=n as u64).filter(|&m| x.contains(&pts[m as usize])).count();
            image_side == source_side
        })
    }

    pub fn report(&self) -> Result<WitnessReport> {
        let bound = self.points.iter().flatten().max().map_or(1, |&z| z + 1);
        let check = self.iso.check_window(bound, bound)?;
        let mut r = WitnessReport::new("edfin", json!({ "depth": self.depth, "target": self.iso.target }), bound);
        r.check("bijective from D onto A′", check.ok(), window_detail(&check));
        r.check(
            "columns increase",
            self.columns.windows(2).all(|w| w[0] < w[1]),
            format!("k = {:?}", self.columns),
        );
        Ok(r.with_data(json!({ "columns": self.columns, "diagonal": self.diagonal })))
    }
}

/// Greedy choice of increasing columns `k_n` with at least `n + 1` points.
pub fn edfin_witness(a: &SetExpr, depth: u64, max_window: u64) -> Result<EdFinWitness> {
    BaseSpace::OmegaSquared.expect(a.space()?)?;
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    let mut diagonal = 2 * depth + 2;
    loop {
        let bound = diagonal * (diagonal + 1) / 2;
        if bound > max_window {
            return Err(Error::Precondition(format!(
                "insufficient column evidence: no increasing columns with n + 1 points for n < {depth} below {max_window}"
            )));
        }
        let mut cols: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for z in a.window(bound)?.elements {
            let (i, j) = unpair(z);
            if i + j < diagonal {
                cols.entry(i).or_default().push(z);
            }
        }
        let mut columns = Vec::new();
        let mut points = Vec::new();
        let mut next = 0u64;
        for n in 0..depth {
            let Some((&k, pts)) = cols.range(next..).find(|(_, p)| p.len() as u64 > n) else { break };
            let mut pts = pts.clone();
            pts.sort_by_key(|&z| unpair(z).1);
            pts.truncate(n as usize + 1);
            columns.push(k);
            points.push(pts);
            next = k + 1;
        }
        if columns.len() as u64 == depth {
            let mut pairs = Vec::new();
            let mut source = Vec::new();
            for (n, pts) in points.iter().enumerate() {
                for (m, &z) in pts.iter().enumerate() {
                    let s = pair(n as u64, m as u64)?;
                    source.push(s);
                    pairs.push((s, z));
                }
            }
            source.sort_unstable();
            let mut target: Vec<u64> = points.iter().flatten().copied().collect();
            target.sort_unstable();
            let iso = IsoWitness::new(
                SetExpr::explicit_in(BaseSpace::OmegaSquared, source),
                SetExpr::explicit_in(BaseSpace::OmegaSquared, target),
                InjectionExpr::table(pairs),
                "column sizes transfer: |X ∩ {k_n}×ω| = |f⁻¹[X] ∩ {n}×ω|",
            );
            return Ok(EdFinWitness { depth, columns, points, iso, diagonal });
        }
        diagonal *= 2;
    }
}

/// `φ((i, j)) = (g(i), f_i(j))`.
pub fn product_witness(g: &IsoWitness, rows: &[IsoWitness], default_row: Option<&IsoWitness>, row_limit: u64) -> Result<IsoWitness> {
    let Some(default) = default_row else {
        return Err(Error::Precondition("row witness missing: rows past the listed ones need a default witness".into()));
    };
    let ev = g.map.evaluator(row_limit)?;
    let mut parts = Vec::new();
    let mut named = Vec::new();
    for (i, f) in rows.iter().enumerate() {
        let gi = ev
            .apply(i as u64)?
            .ok_or_else(|| Error::EffortExceeded(format!("g({i}) is not available below {row_limit}")))?;
        named.push(gi);
        parts.push(SetExpr::rectangle(SetExpr::explicit([gi]), f.target.clone()));
    }
    named.sort_unstable();
    let rest_rows = SetExpr::difference(g.target.clone(), SetExpr::explicit(named));
    parts.push(SetExpr::rectangle(rest_rows, default.target.clone()));
    let target = if rows.is_empty() { parts.pop().expect("one part") } else { SetExpr::union(parts) };
    let source = SetExpr::rectangle(g.source.clone(), default.source.clone());
    let map = InjectionExpr::Pairwise {
        outer: Box::new(g.map.clone()),
        rows: rows.iter().map(|f| f.map.clone()).collect(),
        default_row: Box::new(default.map.clone()),
    };
    Ok(IsoWitness::new(source, target, map, "X ∈ I⊗J ⇔ φ[X] ∈ I⊗J"))
}

/// One grid `A^i_j = v + α·{1..2^i}²` of the construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GallaiBlock {
    pub h: u64,
    pub i: u64,
    pub j: u64,
    pub v: [u64; 2],
    pub alpha: u64,
    pub side: u64,
}

impl GallaiBlock {
    pub fn min_row(&self) -> u64 {
        self.v[0] + self.alpha
    }
    pub fn max_row(&self) -> u64 {
        self.v[0] + self.alpha * self.side
    }
    /// `(k + Σ_{n<i} 2^n, l + 2^i·j)` for `(a, b) = v + α·(k, l)`.
    pub fn image(&self, k: u64, l: u64) -> (u64, u64) {
        (k + self.side - 1, l + self.side * self.j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gallai2Witness {
    pub depth: u64,
    pub blocks: Vec<GallaiBlock>,
    pub map: InjectionExpr,
}

impl Gallai2Witness {
    /// Separation `2·max pr₁(A_h) < min pr₁(A_h′)` for all `h < h′`.
    pub fn separation_holds(&self) -> bool {
        self.blocks.iter().enumerate().all(|(x, p)| self.blocks[x + 1..].iter().all(|q| 2 * p.max_row() < q.min_row()))
    }

    /// Image of each block is `v′ + 1·{1..2^i}²` with `v′ = (2^i − 1, 2^i·j)`.
    pub fn images_are_grids(&self) -> Result<bool> {
        let ev = self.map.evaluator(0)?;
        for b in &self.blocks {
            let mut got = HashSet::new();
            for k in 1..=b.side {
                for l in 1..=b.side {
                    let z = pair(b.v[0] + b.alpha * k, b.v[1] + b.alpha * l)?;
                    let Some(y) = ev.apply(z)? else { return Ok(false) };
                    got.insert(unpair(y));
                }
            }
            let v = (b.side - 1, b.side * b.j);
            let want: HashSet<(u64, u64)> =
                (1..=b.side).flat_map(|k| (1..=b.side).map(move |l| (v.0 + k, v.1 + l))).collect();
            if got != want {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn report(&self, a: &SetExpr) -> Result<WitnessReport> {
        let mut r = WitnessReport::new("gallai2", json!({ "set": a, "depth": self.depth }), self.depth);
        let mut inside = true;
        for b in &self.blocks {
            let g = crate::detectors::GridWitness { v: b.v.to_vec(), alpha: b.alpha, k: b.side };
            inside &= g.check(a)?;
        }
        r.check("every block lies in A", inside, format!("{} blocks", self.blocks.len()));
        r.check("separation 2·max < min for all block pairs", self.separation_holds(), "");
        r.check("block images are translated grids of side 2^i", self.images_are_grids()?, "");
        Ok(r.with_data(json!({ "blocks": self.blocks })))
    }
}

/// Builds the blocks `A^i_j` for `h(i, j) < depth`, `h` the pairing function,
/// with each block separated from the previous one by (ii).
pub fn gallai2_witness(a: &SetExpr, depth: u64, max_width: u64) -> Result<Gallai2Witness> {
    BaseSpace::OmegaSquared.expect(a.space()?)?;
    let member = a.member_fn(u64::MAX);
    let mut blocks: Vec<GallaiBlock> = Vec::new();
    let mut table = Vec::new();
    for h in 0..depth {
        let (i, j) = unpair(h);
        if i >= 32 {
            return Err(Error::EffortExceeded(format!("block side 2^{i} is too large")));
        }
        let side = 1u64 << i;
        let lo = blocks.last().map_or(0, |b| 2 * b.max_row() + 1);
        let mut width = 2 * side + 2;
        let found = loop {
            if width > max_width {
                return Err(Error::EffortExceeded(format!(
                    "no grid of side {side} with rows in [{lo}, {}) and columns below {max_width}",
                    lo + max_width
                )));
            }
            let mut pts = Vec::new();
            for r in 0..width {
                for c in 0..width {
                    if member(pair(lo + r, c)?)? {
                        pts.push(pair(r, c)?);
                    }
                }
            }
            if let Some(g) = find_grid_copy(&pts, side) {
                break g;
            }
            width *= 2;
        };
        // shifting back keeps min row = lo + v0 + α ≥ lo
        let b = GallaiBlock { h, i, j, v: [found.v[0] + lo, found.v[1]], alpha: found.alpha, side };
        for k in 1..=side {
            for l in 1..=side {
                let (x, y) = b.image(k, l);
                table.push((pair(b.v[0] + b.alpha * k, b.v[1] + b.alpha * l)?, pair(x, y)?));
            }
        }
        blocks.push(b);
    }
    Ok(Gallai2Witness { depth, blocks, map: InjectionExpr::table(table) })
}

/// The increasing enumeration `f_A(n) = a_n` of a set of positive lower density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IddEnumWitness {
    #[serde(with = "num::serde_rational")]
    pub lower_bound: Rational,
    pub window: u64,
    /// `max_{n ≥ 1} ⌈a_n / n⌉` on the window.
    pub c: u64,
    /// `⌈1 / lower_bound⌉`.
    pub c_declared: u64,
    /// Least `n₀ ≥ 1` with `a_n ≤ c_declared · n` for all `n ≥ n₀` on the window.
    pub from: u64,
    pub biinvariance: IddBiinvariance,
    pub iso: IsoWitness,
}

impl IddEnumWitness {
    pub fn report(&self) -> WitnessReport {
        let mut r = WitnessReport::new(
            "enum",
            json!({ "set": self.iso.target, "lower_bound": num::fmt_rational(&self.lower_bound), "window": self.window }),
            self.window,
        );
        r.check(
            "linear bound and image density agree on bi-invariance",
            self.biinvariance.bi_invariant,
            format!("C = {}, image density {}", self.biinvariance.c, num::fmt_rational(&self.biinvariance.density)),
        );
        r.with_data(json!({ "c": self.c, "c_declared": self.c_declared, "from": self.from }))
    }
}

const DENSITY_FROM: u64 = 16;

pub fn idd_enum_witness(a: &SetExpr, lower: Option<Rational>, window: u64) -> Result<IddEnumWitness> {
    BaseSpace::Omega.expect(a.space()?)?;
    let lower_bound = match (lower, a) {
        (Some(l), _) => l,
        (None, SetExpr::Annotated { density: Some(d), .. }) => d / num::from_u64(2),
        _ => return Err(Error::Precondition("a positive lower-density bound is required".into())),
    };
    if lower_bound <= Rational::from_integer(0.into()) {
        return Err(Error::Precondition("the lower-density bound must be positive".into()));
    }
    let cps: Vec<u64> = dyadic_checkpoints(window).into_iter().filter(|&c| c >= DENSITY_FROM).collect();
    for (c, count) in cps.iter().zip(prefix_counts(a, &cps)?) {
        if rat_u(count, *c) < lower_bound {
            return Err(Error::Precondition(format!(
                "density {count}/{c} at checkpoint {c} is below the declared bound {}",
                num::fmt_rational(&lower_bound)
            )));
        }
    }
    let elems = a.window(window)?.elements;
    let c = elems.iter().enumerate().skip(1).map(|(n, &x)| x.div_ceil(n as u64)).max().unwrap_or(1);
    let c_declared = num::ceil_int(&(Rational::from_integer(1.into()) / &lower_bound))
        .try_into()
        .map_err(|_| Error::Precondition("declared bound too small".into()))?;
    let mut from = 1u64;
    for (n, &x) in elems.iter().enumerate().skip(1) {
        if x > c_declared * n as u64 {
            from = n as u64 + 1;
        }
    }
    let f = InjectionExpr::enumeration(a.clone());
    let biinvariance = idd_biinvariance(&f, window)?;
    let iso = IsoWitness::new(SetExpr::all(), a.clone(), f, "X ∈ I_d ⇔ f_A[X] ∈ I_d");
    Ok(IddEnumWitness { lower_bound, window, c, c_declared, from, biinvariance, iso })
}
