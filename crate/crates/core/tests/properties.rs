use std::collections::HashSet;

use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

use omega_ideals::convergence::c3_diagonal;
use omega_ideals::detectors::{find_fs_generator, find_fs_generator_brute, longest_ap};
use omega_ideals::ideal::{member, replay, Effort, IdealDescriptor};
use omega_ideals::measures::density_window;
use omega_ideals::num::rat_u;
use omega_ideals::sets::{pair, unpair, InjectionExpr, SetExpr};
use omega_ideals::witnesses::{antihomog_partition_fn, BlockMap};

const W: u64 = 300;

/// A set expression together with its membership vector on `[0, W)`.
#[derive(Debug, Clone)]
struct Model {
    expr: SetExpr,
    bits: Vec<bool>,
}

fn leaf() -> impl Strategy<Value = Model> {
    prop_oneof![
        prop::collection::vec(0..W, 0..20).prop_map(|v| {
            let mut bits = vec![false; W as usize];
            for &x in &v {
                bits[x as usize] = true;
            }
            Model { expr: SetExpr::explicit(v), bits }
        }),
        (0..20u64, 1..12u64).prop_map(|(s, d)| Model {
            expr: SetExpr::arithmetic(s, d),
            bits: (0..W).map(|x| x >= s && (x - s) % d == 0).collect(),
        }),
        Just(Model { expr: SetExpr::Squares, bits: (0..W).map(|x| (0..=x).any(|r| r * r == x)).collect() }),
        (2..5u64).prop_map(|b| Model {
            expr: SetExpr::powers(b),
            bits: (0..W).map(|x| (0..20).any(|k| b.checked_pow(k) == Some(x))).collect(),
        }),
    ]
}

fn model() -> impl Strategy<Value = Model> {
    leaf().prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..3).prop_map(|ms| Model {
                bits: (0..W as usize).map(|i| ms.iter().any(|m| m.bits[i])).collect(),
                expr: SetExpr::union(ms.into_iter().map(|m| m.expr).collect()),
            }),
            prop::collection::vec(inner.clone(), 1..3).prop_map(|ms| Model {
                bits: (0..W as usize).map(|i| ms.iter().all(|m| m.bits[i])).collect(),
                expr: SetExpr::intersection(ms.into_iter().map(|m| m.expr).collect()),
            }),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Model {
                bits: (0..W as usize).map(|i| a.bits[i] && !b.bits[i]).collect(),
                expr: SetExpr::difference(a.expr, b.expr),
            }),
            inner.clone().prop_map(|a| Model { bits: a.bits.iter().map(|b| !b).collect(), expr: SetExpr::complement(a.expr) }),
            (inner, 1..4u64, 0..10u64).prop_map(|(a, m, c)| Model {
                bits: (0..W).map(|y| y >= c && (y - c) % m == 0 && a.bits[((y - c) / m) as usize]).collect(),
                expr: SetExpr::image(InjectionExpr::affine(m, c), a.expr),
            }),
        ]
    })
}

fn injection() -> impl Strategy<Value = InjectionExpr> {
    let base = prop_oneof![
        Just(InjectionExpr::Identity),
        (0..50u64).prop_map(InjectionExpr::shift),
        (1..6u64, 0..20u64).prop_map(|(m, c)| InjectionExpr::affine(m, c)),
        (2..4u32).prop_map(InjectionExpr::power),
        (0..10u64, 1..6u64).prop_map(|(s, d)| InjectionExpr::enumeration(SetExpr::arithmetic(s, d))),
    ];
    base.prop_recursive(2, 4, 2, |inner| (inner.clone(), inner).prop_map(|(f, g)| InjectionExpr::compose(f, g)))
}

fn ap_brute(a: &[u64]) -> u64 {
    let set: HashSet<u64> = a.iter().copied().collect();
    let mut best = a.len().min(1) as u64;
    for &x in a {
        for &y in a {
            if y > x {
                let mut len = 2;
                while set.contains(&(y + (len - 1) * (y - x))) {
                    len += 1;
                }
                best = best.max(len);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn window_matches_model(m in model()) {
        let want: Vec<u64> = (0..W).filter(|&x| m.bits[x as usize]).collect();
        prop_assert_eq!(&m.expr.window(W).unwrap().elements, &want);
    }

    #[test]
    fn pointwise_queries_agree(m in model(), x in 0..W, b in 0..=W) {
        prop_assert_eq!(m.expr.contains(x).unwrap(), m.bits[x as usize]);
        let count = m.bits[..b as usize].iter().filter(|&&v| v).count() as u64;
        prop_assert_eq!(m.expr.count_below(b).unwrap(), count);
        let first = (0..b).find(|&y| m.bits[y as usize]);
        prop_assert_eq!(m.expr.first_below(b).unwrap(), first);
    }

    #[test]
    fn json_round_trip(m in model()) {
        let back = SetExpr::from_json(&m.expr.to_json()).unwrap();
        prop_assert_eq!(back, m.expr);
    }

    #[test]
    fn density_window_counts(m in model()) {
        let d = density_window(&m.expr, W).unwrap();
        let count = m.bits.iter().filter(|&&v| v).count() as u64;
        prop_assert_eq!(d.count, count);
        prop_assert_eq!(d.ratio, rat_u(count, W));
    }

    #[test]
    fn injections_invert(f in injection(), x in 0..200u64) {
        let ev = f.evaluator(1 << 20).unwrap();
        if let Some(y) = ev.apply(x).unwrap() {
            prop_assert_eq!(ev.inverse(y).unwrap(), Some(x));
        }
    }

    #[test]
    fn injections_are_injective(f in injection()) {
        let ev = f.evaluator(1 << 20).unwrap();
        let mut seen = HashSet::new();
        for x in 0..100 {
            if let Some(y) = ev.apply(x).unwrap() {
                prop_assert!(seen.insert(y));
            }
        }
    }

    #[test]
    fn longest_ap_matches_brute(mut a in prop::collection::vec(0..200u64, 0..30)) {
        a.sort_unstable();
        a.dedup();
        let r = longest_ap(&a);
        prop_assert_eq!(r.length, ap_brute(&a));
        if let Some(w) = r.witness {
            let set: HashSet<u64> = a.iter().copied().collect();
            prop_assert!(w.terms().all(|t| set.contains(&t)));
        }
    }

    #[test]
    fn fs_generator_matches_exhaustive(a in prop::collection::vec(0..80u64, 0..60), n in 1..=3usize) {
        prop_assert_eq!(find_fs_generator(&a, 80, n), find_fs_generator_brute(&a, 80, n));
    }

    #[test]
    fn pairing_round_trips(i in 0..100_000u64, j in 0..100_000u64) {
        prop_assert_eq!(unpair(pair(i, j).unwrap()), (i, j));
    }

    #[test]
    fn fin_verdicts_replay(v in prop::collection::vec(0..1000u64, 0..20), s in 0..10u64, d in 1..10u64) {
        let fin = IdealDescriptor::from_json(r#"{"kind":"fin"}"#).unwrap();
        let effort = Effort::default();
        prop_assert!(member(&fin, &SetExpr::explicit(v), &effort).unwrap().is_in());
        let a = SetExpr::arithmetic(s, d);
        let out = member(&fin, &a, &effort).unwrap();
        prop_assert!(out.is_out());
        if let Some(w) = out.witness() {
            prop_assert!(replay(&fin, &a, w).unwrap());
        }
    }

    #[test]
    fn density_verdicts(s in 0..10u64, d in 1..10u64, b in 2..5u64) {
        let effort = Effort::default();
        let id = IdealDescriptor::DensityZero;
        prop_assert!(member(&id, &SetExpr::arithmetic(s, d), &effort).unwrap().is_out());
        prop_assert!(member(&id, &SetExpr::powers(b), &effort).unwrap().is_in());
    }

    #[test]
    fn c3_level_sets_stay_in_prefix_unions(fam in prop::collection::vec(prop::collection::vec(0..500u64, 0..15), 1..=8), k in 1..=20u64) {
        let family: Vec<SetExpr> = fam.iter().map(|v| SetExpr::explicit(v.iter().copied())).collect();
        let seq = c3_diagonal(&family);
        let level = seq.level_set(&BigRational::zero(), &rat_u(1, k)).unwrap().window(500).unwrap().elements;
        let allowed: HashSet<u64> = fam.iter().take(k as usize).flatten().copied().collect();
        prop_assert!(level.iter().all(|x| allowed.contains(x)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn block_maps_respect_factorial_bounds(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = BlockMap::random(&mut rng, 7);
        let s = antihomog_partition_fn(&|x| Ok(m.apply(x)), 7).unwrap();
        prop_assert!(s.bounds_hold);
        prop_assert!(s.blocks.iter().filter(|b| b.n >= 2).all(|b| b.strict_two_over_n));
    }
}
