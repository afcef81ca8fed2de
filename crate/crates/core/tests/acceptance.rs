//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use omega_ideals::convergence::{c3_check, c3_diagonal, idd_biinvariance};
use omega_ideals::detectors::{find_fs_generator, longest_ap};
use omega_ideals::ideal::{Effort, IdealDescriptor};
use omega_ideals::measures::{abel_dini, WeightFn};
use omega_ideals::num::{factorial, rat_u};
use omega_ideals::sets::{pair, unpair, InjectionExpr, SetExpr};
use omega_ideals::witnesses::{
    antihomog_partition_fn, edfin_witness, eu_dense_counterexample, eu_nondense_counterexample, gallai2_witness,
    superset_closure, BlockMap, DenseCase, IsoWitness,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion(id: u32, name: &str, limit: Duration, body: impl FnOnce() -> Check) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    let (status, detail) = match (&outcome, in_time) {
        (Ok(d), true) => ("PASS", d.clone()),
        (Ok(d), false) => ("FAIL", format!("{d}; took {elapsed:?}, limit {limit:?}")),
        (Err(e), _) => ("FAIL", e.clone()),
    };
    println!("criterion {id:>2} {status} [{:>8.3} s / {:>4} s] {name}: {detail}", elapsed.as_secs_f64(), limit.as_secs());
    assert!(outcome.is_ok() && in_time, "criterion {id} ({name}) failed: {detail}");
}

fn big(r: &BigRational) -> String {
    format!("{r}")
}

#[test]
fn criterion_01_superset_closure() {
    criterion(1, "superset closure for Fin, f(n) = 2n", Duration::from_secs(1), || {
        let window = 1u64 << 14;
        let f = IsoWitness::new(SetExpr::all(), SetExpr::evens(), InjectionExpr::affine(2, 0), "X ∈ Fin ⇔ f[X] ∈ Fin");
        let b = SetExpr::union(vec![SetExpr::evens(), SetExpr::explicit([1])]);
        let c = superset_closure(&f, &b, window).map_err(|e| e.to_string())?;

        // inverse orbit of an even x > 0 under n ↦ 2n ends at its odd part
        let oracle: Vec<u64> = (1..window).filter(|x| x % 2 == 0).filter(|&x| x >> x.trailing_zeros() == 1).collect();
        let expected: Vec<u64> = (1..=13).map(|k| 1u64 << k).collect();
        ensure(oracle == expected, || "orbit oracle disagrees with {2^k}".into())?;
        ensure(c.a_prime == expected, || format!("A′ = {:?}", c.a_prime))?;
        ensure(c.check.ok() && c.pointwise, || format!("window check {:?}", c.check))?;

        let ev = c.phi.map.evaluator(window).map_err(|e| e.to_string())?;
        let mut seen = HashSet::new();
        let mut image = BTreeSet::new();
        for x in 0..window {
            let y = ev.apply(x).map_err(|e| e.to_string())?.ok_or(format!("φ({x}) undefined"))?;
            ensure(seen.insert(y), || format!("φ not injective at {y}"))?;
            if y < window {
                image.insert(y);
            }
        }
        let target: BTreeSet<u64> = (0..window).filter(|&y| y % 2 == 0 || y == 1).collect();
        ensure(image == target, || "φ[ω] ∩ window differs from B ∩ window".into())?;
        Ok(format!("A′ = {{2^k : 1 ≤ k ≤ 13}}, φ bijective onto B ∩ [0, {window})"))
    })
}

#[test]
fn criterion_02_edfin_column_transfer() {
    criterion(2, "ED_fin witness for D at depth 50", Duration::from_secs(1), || {
        let d = SetExpr::LowerTriangle;
        let w = edfin_witness(&d, 50, 1 << 22).map_err(|e| e.to_string())?;
        let check = w.iso.check_window(1 << 16, 1 << 16).map_err(|e| e.to_string())?;
        ensure(check.ok(), || format!("not a bijection: {check:?}"))?;
        let cols: HashMap<u64, usize> = w.columns.iter().enumerate().map(|(n, &k)| (k, n)).collect();
        let bound = w.points.iter().flatten().max().copied().unwrap_or(0) + 1;
        let pool: Vec<u64> = d.window(bound).map_err(|e| e.to_string())?.elements.into_iter().filter(|&z| cols.contains_key(&unpair(z).0)).collect();
        let ev = w.iso.map.evaluator(bound).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..100 {
            let x: Vec<u64> = pool.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let mut image_side = vec![0usize; w.columns.len()];
            let mut source_side = vec![0usize; w.columns.len()];
            for &z in &x {
                image_side[cols[&unpair(z).0]] += 1;
                let s = ev.inverse(z).map_err(|e| e.to_string())?.ok_or(format!("{z} has no preimage"))?;
                let row = unpair(s).0 as usize;
                if row < source_side.len() {
                    source_side[row] += 1;
                }
            }
            ensure(image_side == source_side, || format!("trial {trial}: column counts differ"))?;
            ensure(w.column_transfer(&x), || format!("trial {trial}: library transfer check disagrees"))?;
        }
        Ok(format!("columns k_0..k_49 = {}..{}, 100 random X transfer exactly", w.columns[0], w.columns[49]))
    })
}

#[test]
fn criterion_03_gallai_separation() {
    criterion(3, "Gallai map on ω² with h(i, j) < 10", Duration::from_secs(5), || {
        let a = SetExpr::from_json(r#"{"kind":"all","space":"omega-squared"}"#).map_err(|e| e.to_string())?;
        let w = gallai2_witness(&a, 10, 1 << 12).map_err(|e| e.to_string())?;
        ensure(w.blocks.len() == 10, || format!("{} blocks", w.blocks.len()))?;
        let rows = |b: &omega_ideals::witnesses::GallaiBlock| (b.v[0] + b.alpha, b.v[0] + b.alpha * b.side);
        for (x, p) in w.blocks.iter().enumerate() {
            for q in &w.blocks[x + 1..] {
                ensure(2 * rows(p).1 < rows(q).0, || format!("blocks {} and {} not separated", p.h, q.h))?;
            }
        }
        let ev = w.map.evaluator(0).map_err(|e| e.to_string())?;
        for b in &w.blocks {
            ensure(b.side == 1 << b.i, || format!("block {} has side {}", b.h, b.side))?;
            let mut img = HashSet::new();
            for k in 1..=b.side {
                for l in 1..=b.side {
                    let z = pair(b.v[0] + b.alpha * k, b.v[1] + b.alpha * l).map_err(|e| e.to_string())?;
                    let y = ev.apply(z).map_err(|e| e.to_string())?.ok_or(format!("block {} point unmapped", b.h))?;
                    img.insert(unpair(y));
                }
            }
            let x0 = img.iter().map(|p| p.0).min().unwrap_or(0);
            let y0 = img.iter().map(|p| p.1).min().unwrap_or(0);
            let square: HashSet<(u64, u64)> = (0..b.side).flat_map(|k| (0..b.side).map(move |l| (x0 + k, y0 + l))).collect();
            ensure(img == square, || format!("image of block {} is not a translated grid", b.h))?;
        }
        ensure(w.separation_holds() && w.images_are_grids().map_err(|e| e.to_string())?, || "library checks disagree".into())?;
        Ok("separation holds for all 45 pairs, images are grids of side 2^i".into())
    })
}

#[test]
fn criterion_04_idd_biinvariance_agreement() {
    criterion(4, "linear-bound and image-density criteria agree", Duration::from_secs(5), || {
        let n = 1_000_000u64;
        let mut family: Vec<(String, InjectionExpr, bool)> = Vec::new();
        for mul in 1..=5u64 {
            for add in [0u64, 3, 17] {
                family.push((format!("{mul}n+{add}"), InjectionExpr::affine(mul, add), true));
            }
        }
        for by in [1u64, 10, 100, 1000, 5000] {
            family.push((format!("n+{by}"), InjectionExpr::shift(by), true));
        }
        for exp in [2u32, 3, 4] {
            family.push((format!("n^{exp}"), InjectionExpr::power(exp), false));
        }
        for (mul, add) in [(1u64, 1u64), (2, 0), (3, 5), (7, 2)] {
            family.push((format!("({mul}n+{add})^2"), InjectionExpr::compose(InjectionExpr::affine(mul, add), InjectionExpr::power(2)), false));
        }
        for exp in [2u32, 3] {
            family.push((format!("2n^{exp}+1"), InjectionExpr::compose(InjectionExpr::power(exp), InjectionExpr::affine(2, 1)), false));
        }
        for (start, step) in [(0u64, 2u64), (1, 2), (5, 3), (0, 7), (2, 10), (1, 16), (3, 32), (0, 50)] {
            family.push((format!("enum {start}+{step}ω"), InjectionExpr::enumeration(SetExpr::arithmetic(start, step)), true));
        }
        let enums: Vec<(&str, SetExpr, bool)> = vec![
            ("enum squares", SetExpr::Squares, false),
            ("enum powers of 2", SetExpr::powers(2), false),
            ("enum powers of 3", SetExpr::powers(3), false),
            ("enum non-squares", SetExpr::complement(SetExpr::Squares), true),
            ("enum evens ∪ squares", SetExpr::union(vec![SetExpr::evens(), SetExpr::Squares]), true),
            ("enum odds ∖ squares", SetExpr::difference(SetExpr::odds(), SetExpr::Squares), true),
            ("enum squares ∪ powers", SetExpr::union(vec![SetExpr::Squares, SetExpr::powers(2)]), false),
            ("enum non-powers", SetExpr::complement(SetExpr::powers(2)), true),
            ("enum 3ω ∪ 5ω", SetExpr::union(vec![SetExpr::arithmetic(0, 3), SetExpr::arithmetic(0, 5)]), true),
            ("enum 4ω+1 ∪ powers of 3", SetExpr::union(vec![SetExpr::arithmetic(1, 4), SetExpr::powers(3)]), true),
            ("enum image of squares under n+1", SetExpr::image(InjectionExpr::shift(1), SetExpr::Squares), false),
            ("enum non-cubes-ish", SetExpr::complement(SetExpr::image(InjectionExpr::power(3), SetExpr::all())), true),
            ("enum 6ω+5", SetExpr::arithmetic(5, 6), true),
        ];
        for (name, set, truth) in enums {
            family.push((name.into(), InjectionExpr::enumeration(set), truth));
        }
        ensure(family.len() == 50, || format!("family has {} maps", family.len()))?;
        for (name, f, truth) in &family {
            let r = idd_biinvariance(f, n).map_err(|e| format!("{name}: {e}"))?;
            ensure(r.linear_ok == r.density_ok, || format!("{name}: criteria disagree"))?;
            ensure(r.bi_invariant == *truth, || format!("{name}: classified {} (C = {}, d = {})", r.bi_invariant, r.c, big(&r.density)))?;
        }
        let sq = idd_biinvariance(&InjectionExpr::power(2), n).map_err(|e| e.to_string())?;
        let count = (0..).take_while(|k: &u64| k * k < n).count() as u64;
        ensure(count == 1000 && sq.density == rat_u(count, n) && sq.density == rat_u(1, 1000), || format!("n² density {}", big(&sq.density)))?;
        ensure(!sq.bi_invariant, || "n² classified bi-invariant".into())?;
        Ok(format!("50 maps agree; n² has image density {} at N = 10^6", big(&sq.density)))
    })
}

fn uint(n: &BigUint) -> BigRational {
    BigRational::from_integer(n.clone().into())
}

#[test]
fn criterion_05_eu_nondense() {
    criterion(5, "Erdős–Ulam non-dense counterexample at n = 3", Duration::from_secs(1), || {
        let r = eu_nondense_counterexample(3).map_err(|e| e.to_string())?;
        let b = &r.blocks[3];
        // weight |I_m| on I_m = [offset(m), offset(m+1)), |I_m| = (2^m)!; A = max I_m
        let lens: Vec<BigUint> = (0..=4u32).map(|m| (1..=1u64 << m).map(BigUint::from).product()).collect();
        let a_mass: BigUint = lens[..4].iter().sum();
        let total: BigUint = lens[..4].iter().map(|l| l * l).sum();
        let ratio_a = uint(&a_mass) / uint(&total);
        // f[A] = A + 1 = {min I_m : m ≥ 1}
        let img_mass: BigUint = lens[1..5].iter().sum();
        let ratio_img = uint(&img_mass) / uint(&(&total + &lens[4]));
        ensure(b.ratio_a == ratio_a, || format!("A ratio {} vs oracle {}", big(&b.ratio_a), big(&ratio_a)))?;
        ensure(b.ratio_image == ratio_img, || format!("f[A] ratio {} vs oracle {}", big(&b.ratio_image), big(&ratio_img)))?;

        let f8 = factorial(8);
        let f16 = factorial(16);
        let upper = rat_u(3, 40320);
        let lower = uint(&f16) / uint(&(&f16 + BigUint::from(3u8) * &f8 * &f8));
        ensure(b.ratio_a <= upper, || format!("{} > 3/40320", big(&b.ratio_a)))?;
        ensure(b.ratio_image >= lower, || format!("{} below the displayed bound", big(&b.ratio_image)))?;
        ensure(lower > rat_u(999, 1000), || "displayed bound not above 0.999".into())?;
        ensure(r.report.passed(), || "report has failing checks".into())?;
        Ok(format!("A: {:.3e} ≤ 3/40320, f[A]: {:.7} ≥ {:.7}", b.ratio_a_approx, b.ratio_image_approx, lower.to_f64().unwrap_or(0.0)))
    })
}

#[test]
fn criterion_06_eu_dense() {
    criterion(6, "Erdős–Ulam dense construction to n = 40", Duration::from_secs(10), || {
        let r = eu_dense_counterexample(40, &DenseCase::One { b: BigRational::one() }).map_err(|e| e.to_string())?;
        let mut k_prev = 0u64;
        for b in &r.blocks {
            // least k with 2^k ≥ n·2^{k_{n-1}}
            let mut k = k_prev;
            while n_times_pow2(b.n.max(1), k_prev) > BigUint::one() << k {
                k += 1;
            }
            ensure(b.k == k && b.kn_ok, || format!("k_{} = {} vs oracle {k}", b.n, b.k))?;
            k_prev = k;
        }
        ensure(r.blocks.iter().any(|b| b.n == 40), || "block 40 missing".into())?;
        let third = rat_u(1, 3);
        for b in r.blocks.iter().filter(|b| b.n >= 1) {
            ensure(b.eq1_half > third, || format!("a_n = 1/2 ratio {} at n = {}", big(&b.eq1_half), b.n))?;
        }
        for eps in [rat_u(1, 5), rat_u(1, 10), rat_u(1, 20)] {
            let from = r.blocks.iter().rposition(|b| b.eq1_reciprocal >= eps).map_or(0, |i| i + 1);
            ensure(from < r.blocks.len(), || format!("a_n = 1/n ratio never below {}", big(&eps)))?;
        }
        let ad = abel_dini(&WeightFn::ones(), &BigRational::one(), 1_000_000).map_err(|e| e.to_string())?;
        let mut oracle = 0f64;
        for n in (1..=1_000_000u64).rev() {
            oracle += 1.0 / (n as f64 * n as f64);
        }
        let (lo, hi) = (ad.lower.to_f64().unwrap_or(f64::NAN), ad.upper.to_f64().unwrap_or(f64::NAN));
        ensure(lo - 1e-12 <= oracle && oracle <= hi + 1e-12, || format!("oracle {oracle} outside [{lo}, {hi}]"))?;
        ensure(ad.upper < BigRational::from_integer(2.into()), || format!("Abel–Dini partial sum {hi} ≥ 2"))?;
        let last = r.blocks.last().map(|b| b.eq1_reciprocal.to_f64().unwrap_or(0.0)).unwrap_or(0.0);
        Ok(format!("k_n recursion holds to 40, 1/n ratio at 40 = {last:.4}, Σ 1/n² to 10^6 ≤ {hi:.6}"))
    })
}

fn n_times_pow2(n: u64, k: u64) -> BigUint {
    BigUint::from(n) << k
}

#[test]
fn criterion_07_antihomog_random_maps() {
    criterion(7, "factorial-block partition for 100 random maps", Duration::from_secs(10), || {
        let n_max = 9u64;
        let mut offs = vec![0u64];
        for n in 0..=n_max {
            offs.push(offs[n as usize] + factorial(n).to_u64().expect("small"));
        }
        let block_of = |y: u64| offs.partition_point(|&o| o <= y) - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = BigRational::zero();
        for trial in 0..100 {
            let m = BlockMap::random(&mut rng, n_max);
            let stats = antihomog_partition_fn(&|x| Ok(m.apply(x)), n_max).map_err(|e| e.to_string())?;
            let mut minus = vec![0u64; n_max as usize + 1];
            let mut image_plus = vec![0u64; n_max as usize + 2];
            for n in 0..=n_max as usize {
                for x in offs[n]..offs[n + 1] {
                    let y = m.apply(x).ok_or(format!("trial {trial}: f({x}) undefined"))?;
                    if y < offs[n] {
                        minus[n] += 1;
                    } else if y >= offs[n + 1] && y < offs[n_max as usize + 1] {
                        image_plus[block_of(y)] += 1;
                    }
                }
            }
            for n in 2..=n_max as usize {
                let len = offs[n + 1] - offs[n];
                let b = &stats.blocks[n];
                ensure(b.minus == minus[n] && b.phi_image_plus == rat_u(image_plus[n], len), || format!("trial {trial}, n = {n}: counts differ"))?;
                // φ < 2/n ⇔ count·n < 2·n!
                let nn = n as u64;
                ensure(minus[n] * nn < 2 * len && image_plus[n] * nn < 2 * len, || {
                    format!("trial {trial}, n = {n}: φ(ω⁻) = {}/{len}, φ(f[ω⁺]) = {}/{len}", minus[n], image_plus[n])
                })?;
                ensure(b.strict_two_over_n, || format!("trial {trial}, n = {n}: library flag disagrees"))?;
                let scaled = rat_u(image_plus[n].max(minus[n]) * nn, 2 * len);
                if scaled > worst {
                    worst = scaled;
                }
            }
        }
        Ok(format!("max over maps and n ≥ 2 of φ/(2/n) = {}", big(&worst)))
    })
}

fn ap_oracle(a: &[u64]) -> u64 {
    let set: HashSet<u64> = a.iter().copied().collect();
    let mut best = a.len().min(1) as u64;
    for &x in a {
        for &y in a {
            if y > x {
                let d = y - x;
                let mut len = 2;
                while set.contains(&(y + (len - 1) * d)) {
                    len += 1;
                }
                best = best.max(len);
            }
        }
    }
    best
}

fn fs_oracle(a: &[u64], bound: u64, n: usize) -> Option<Vec<u64>> {
    let mut inside = vec![false; bound as usize];
    let mut elems: Vec<u64> = a.iter().copied().filter(|&x| x > 0 && x < bound).collect();
    elems.sort_unstable();
    elems.dedup();
    for &x in &elems {
        inside[x as usize] = true;
    }
    let ok = |s: u64| s < bound && inside[s as usize];
    let m = elems.len();
    match n {
        0 => Some(vec![]),
        1 => elems.first().map(|&x| vec![x]),
        2 => (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).find(|&(i, j)| ok(elems[i] + elems[j])).map(|(i, j)| vec![elems[i], elems[j]]),
        3 => {
            for i in 0..m {
                for j in i + 1..m {
                    let (x, y) = (elems[i], elems[j]);
                    if !ok(x + y) {
                        continue;
                    }
                    for &z in &elems[j + 1..] {
                        if ok(x + z) && ok(y + z) && ok(x + y + z) {
                            return Some(vec![x, y, z]);
                        }
                    }
                }
            }
            None
        }
        _ => unreachable!("oracle covers n ≤ 3"),
    }
}

#[test]
fn criterion_08_detector_oracles() {
    criterion(8, "detectors match exhaustive oracles", Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut lengths = [0u64; 2];
        for trial in 0..1000 {
            let size = rng.gen_range(0..=40usize);
            let span = rng.gen_range(size.max(1) as u64..=400);
            let mut a: Vec<u64> = (0..size).map(|_| rng.gen_range(0..span)).collect();
            a.sort_unstable();
            a.dedup();
            let got = longest_ap(&a);
            let want = ap_oracle(&a);
            ensure(got.length == want, || format!("trial {trial}: {} vs oracle {want} on {a:?}", got.length))?;
            if let Some(w) = &got.witness {
                let set: HashSet<u64> = a.iter().copied().collect();
                ensure(w.length == want && w.terms().all(|t| set.contains(&t)), || format!("trial {trial}: bad witness {w:?}"))?;
            }
            lengths[0] = lengths[0].max(want);
            lengths[1] += want;
        }
        let mut found = 0;
        let mut runs = 0;
        for n in 1..=3usize {
            for trial in 0..25 {
                let bound = rng.gen_range(10..=200u64);
                let a: Vec<u64> = match trial % 3 {
                    0 => {
                        let p = rng.gen_range(0.05..0.9);
                        (0..bound).filter(|_| rng.gen_bool(p)).collect()
                    }
                    1 => {
                        let d = rng.gen_range(1..=12u64);
                        (0..bound).filter(|x| x % d == 0 || rng.gen_bool(0.05)).collect()
                    }
                    _ => (0..bound).filter(|&x| x % 2 == 1 || rng.gen_bool(0.1)).collect(),
                };
                let got = find_fs_generator(&a, bound, n);
                let want = fs_oracle(&a, bound, n);
                ensure(got == want, || format!("n = {n}, bound = {bound}: {got:?} vs oracle {want:?}"))?;
                found += usize::from(want.is_some());
                runs += 1;
            }
        }
        Ok(format!("1000 AP instances (max length {}), {runs} FS instances ({found} with generators)", lengths[0]))
    })
}

#[test]
fn criterion_09_c3_diagonal() {
    // the one-second budget applies to each family; the whole sweep gets one second per family
    criterion(9, "C3 diagonal level sets at window 10^4", Duration::from_secs(12), || {
        let window = 10_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let density = IdealDescriptor::DensityZero;
        let fin = IdealDescriptor::from_json(r#"{"kind":"fin"}"#).map_err(|e| e.to_string())?;
        let effort = Effort::default();
        let mut families = 0;
        let mut slowest = Duration::ZERO;
        for round in 0..12 {
            let (ideal, pool): (&IdealDescriptor, Vec<SetExpr>) = if round % 3 == 0 {
                let finite = (0..8).map(|_| {
                    let k = rng.gen_range(0..30);
                    SetExpr::explicit((0..k).map(|_| rng.gen_range(0..window)))
                });
                (&fin, finite.collect())
            } else {
                let mut pool = vec![SetExpr::Squares, SetExpr::powers(2), SetExpr::powers(3), SetExpr::image(InjectionExpr::shift(1), SetExpr::Squares)];
                pool.push(SetExpr::image(InjectionExpr::power(3), SetExpr::all()));
                pool.push(SetExpr::explicit((0..20).map(|_| rng.gen_range(0..window))));
                pool.push(SetExpr::image(InjectionExpr::affine(3, 2), SetExpr::powers(2)));
                pool.push(SetExpr::image(InjectionExpr::shift(7), SetExpr::Squares));
                (&density, pool)
            };
            let started = Instant::now();
            let size = rng.gen_range(1..=8usize);
            let mut family: Vec<SetExpr> = Vec::new();
            for _ in 0..size {
                family.push(pool[rng.gen_range(0..pool.len())].clone());
            }
            let members: Vec<Vec<bool>> = family
                .iter()
                .map(|a| {
                    let els = a.window(window).map_err(|e| e.to_string())?.elements;
                    let mut v = vec![false; window as usize];
                    for x in els {
                        v[x as usize] = true;
                    }
                    Ok(v)
                })
                .collect::<Result<_, String>>()?;
            // x_n = 1/i for the least i with n ∈ A_i
            let first: Vec<Option<usize>> = (0..window as usize).map(|n| members.iter().position(|m| m[n]).map(|i| i + 1)).collect();
            let seq = c3_diagonal(&family);
            for k in 1..=64u64 {
                let oracle: Vec<u64> = (0..window).filter(|&n| first[n as usize].is_some_and(|i| i as u64 <= k)).collect();
                let level = seq.level_set(&BigRational::zero(), &rat_u(1, k)).map_err(|e| e.to_string())?;
                let got = level.window(window).map_err(|e| e.to_string())?.elements;
                ensure(got == oracle, || format!("round {round}, k = {k}: level set differs from oracle"))?;
                ensure(got.iter().all(|&n| members[..(k as usize).min(size)].iter().any(|m| m[n as usize])), || {
                    format!("round {round}, k = {k}: L(0, 1/k) ⊄ A_1 ∪ … ∪ A_k")
                })?;
            }
            let r = c3_check(&family, ideal, &effort, window).map_err(|e| e.to_string())?;
            ensure(r.inclusion_failures.is_empty(), || format!("round {round}: failures {:?}", r.inclusion_failures))?;
            let took = started.elapsed();
            ensure(took < Duration::from_secs(1), || format!("round {round} took {took:?}"))?;
            slowest = slowest.max(took);
            families += 1;
        }
        Ok(format!("{families} families, k ≤ 64, inclusion exact on [0, {window}), slowest family {:.3} s", slowest.as_secs_f64()))
    })
}

#[test]
fn criterion_10_cli_determinism() {
    criterion(10, "CLI reports are byte-identical across runs", Duration::from_secs(60), || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let evens = dir.path().join("evens.json");
        std::fs::write(&evens, r#"{"kind":"arithmetic","start":0,"step":2}"#).map_err(|e| e.to_string())?;
        let evens = evens.to_string_lossy().to_string();
        let runs: Vec<Vec<&str>> = vec![
            vec!["member", "--ideal", r#"{"kind":"density"}"#, "--set", r#"{"kind":"squares"}"#],
            vec!["detect", "ap", "--set-file", &evens, "--window", "100"],
            vec!["witness", "eu-nondense", "--depth", "3"],
            vec!["witness", "antihomog", "--random", "3", "--depth", "6"],
            vec!["witness", "edfin", "--set", r#"{"kind":"lower-triangle"}"#, "--depth", "10", "--samples", "20"],
            vec!["density", "--set", r#"{"kind":"squares"}"#, "--window", "4096", "--format", "csv"],
            vec!["idd-biinv", "--map", r#"{"kind":"power","exp":2}"#, "--window", "100000"],
            vec!["c5-refute", "--window", "65536"],
        ];
        for (i, args) in runs.iter().enumerate() {
            let mut outputs = Vec::new();
            for rep in 0..2 {
                let report = dir.path().join(format!("r{i}-{rep}.json"));
                let out = Command::new(env!("CARGO_BIN_EXE_omega"))
                    .args(args)
                    .args(["--seed", "11", "--report"])
                    .arg(&report)
                    .env_remove("OMEGA_EFFORT")
                    .output()
                    .map_err(|e| e.to_string())?;
                let file = std::fs::read(&report).map_err(|e| format!("{args:?}: {e}"))?;
                outputs.push((out.status.code(), out.stdout, file));
            }
            ensure(outputs[0].0 == Some(0), || format!("{args:?} exited with {:?}", outputs[0].0))?;
            ensure(outputs[0] == outputs[1], || format!("{args:?}: output differs between runs"))?;
        }
        Ok(format!("{} commands reproduced byte for byte", runs.len()))
    })
}
