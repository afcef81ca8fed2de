use std::collections::HashMap;

use num_integer::Roots;
use serde::{Deserialize, Serialize};

use super::expr::SetExpr;
use super::space::{pair, unpair};
use crate::error::{Error, Result};

/// Symbolic injection on encoded elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InjectionExpr {
    Identity,
    Shift {
        by: u64,
    },
    /// `n ↦ mul·n + add`
    Affine {
        mul: u64,
        add: u64,
    },
    /// `n ↦ n^exp`
    Power {
        exp: u32,
    },
    /// `2k ↔ 2k+1`
    SwapPairs,
    /// Increasing enumeration `n ↦ a_n` of the set.
    Enumeration {
        set: Box<SetExpr>,
    },
    /// n-th element of `from` ↦ n-th element of `to`; identity off `from`.
    Matching {
        from: Box<SetExpr>,
        to: Box<SetExpr>,
    },
    /// Finite overrides on top of a default map.
    Table {
        pairs: Vec<(u64, u64)>,
        #[serde(default = "identity_box")]
        default: Box<InjectionExpr>,
    },
    /// Piecewise translation: for the last `(start, target)` with
    /// `start ≤ x`, `x ↦ target + (x - start)`; identity before the first.
    Segments {
        segments: Vec<(u64, u64)>,
    },
    /// `map` on `domain`, its inverse on `map[domain]`, identity elsewhere.
    Exchange {
        domain: Box<SetExpr>,
        map: Box<InjectionExpr>,
    },
    /// Identity on `fixed`, `map` elsewhere.
    FixOn {
        fixed: Box<SetExpr>,
        map: Box<InjectionExpr>,
    },
    /// `(i, j) ↦ (outer(i), rows[i](j))` on Cantor-encoded pairs.
    Pairwise {
        outer: Box<InjectionExpr>,
        #[serde(default)]
        rows: Vec<InjectionExpr>,
        #[serde(default = "identity_box")]
        default_row: Box<InjectionExpr>,
    },
    /// `then ∘ first`
    Compose {
        first: Box<InjectionExpr>,
        then: Box<InjectionExpr>,
    },
}

fn identity_box() -> Box<InjectionExpr> {
    Box::new(InjectionExpr::Identity)
}

impl InjectionExpr {
    pub fn shift(by: u64) -> Self {
        InjectionExpr::Shift { by }
    }
    pub fn affine(mul: u64, add: u64) -> Self {
        InjectionExpr::Affine { mul, add }
    }
    pub fn power(exp: u32) -> Self {
        InjectionExpr::Power { exp }
    }
    pub fn enumeration(set: SetExpr) -> Self {
        InjectionExpr::Enumeration { set: Box::new(set) }
    }
    pub fn table(pairs: Vec<(u64, u64)>) -> Self {
        InjectionExpr::Table { pairs, default: identity_box() }
    }
    pub fn compose(first: InjectionExpr, then: InjectionExpr) -> Self {
        InjectionExpr::Compose { first: Box::new(first), then: Box::new(then) }
    }

    pub fn validate(&self) -> Result<()> {
        use InjectionExpr::*;
        match self {
            Affine { mul: 0, .. } => Err(Error::Malformed("affine map needs mul >= 1".into())),
            Power { exp: 0 } => Err(Error::Malformed("power map needs exp >= 1".into())),
            Enumeration { set } => set.space().map(|_| ()),
            Matching { from, to } => {
                from.space()?;
                to.space().map(|_| ())
            }
            Table { pairs, default } => {
                let mut seen = HashMap::new();
                for &(a, b) in pairs {
                    if let Some(prev) = seen.insert(b, a) {
                        if prev != a {
                            return Err(Error::Injectivity { first: prev, second: a, image: b });
                        }
                    }
                }
                default.validate()
            }
            Segments { segments } => {
                if segments.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::Malformed("segment starts must increase".into()));
                }
                Ok(())
            }
            Exchange { domain, map } | FixOn { fixed: domain, map } => {
                domain.space()?;
                map.validate()
            }
            Pairwise { outer, rows, default_row } => {
                outer.validate()?;
                rows.iter().try_for_each(|r| r.validate())?;
                default_row.validate()
            }
            Compose { first, then } => {
                first.validate()?;
                then.validate()
            }
            _ => Ok(()),
        }
    }

    /// Prepares the map for evaluation. Enumeration-based pieces are
    /// materialized on `[0, limit)`; their values at or beyond `limit` are
    /// reported as unavailable.
    pub fn evaluator(&self, limit: u64) -> Result<Evaluator<'_>> {
        self.validate()?;
        Ok(Evaluator { node: compile(self, limit)?, limit })
    }

    /// Increasing on `[0, n)` when every value is available.
    pub fn check_increasing(&self, n: u64, limit: u64) -> Result<()> {
        let ev = self.evaluator(limit)?;
        let mut prev: Option<u64> = None;
        for x in 0..n {
            let Some(y) = ev.apply(x)? else { break };
            if let Some(p) = prev {
                if y <= p {
                    return Err(Error::NotIncreasing { at: x });
                }
            }
            prev = Some(y);
        }
        Ok(())
    }
}

pub struct Evaluator<'a> {
    node: Node<'a>,
    limit: u64,
}

enum Node<'a> {
    Closed(&'a InjectionExpr),
    Enumeration { elems: Vec<u64> },
    Matching { from: Vec<u64>, to: Vec<u64> },
    Table { fwd: HashMap<u64, u64>, back: HashMap<u64, u64>, default: Box<Node<'a>> },
    Exchange { domain: &'a SetExpr, map: Box<Node<'a>> },
    FixOn { fixed: &'a SetExpr, map: Box<Node<'a>> },
    Pairwise { outer: Box<Node<'a>>, rows: Vec<Node<'a>>, default_row: Box<Node<'a>> },
    Compose { first: Box<Node<'a>>, then: Box<Node<'a>> },
}

fn compile(expr: &InjectionExpr, limit: u64) -> Result<Node<'_>> {
    use InjectionExpr::*;
    Ok(match expr {
        Identity | Shift { .. } | Affine { .. } | Power { .. } | SwapPairs | Segments { .. } => Node::Closed(expr),
        Enumeration { set } => Node::Enumeration { elems: set.window(limit)?.elements },
        Matching { from, to } => Node::Matching { from: from.window(limit)?.elements, to: to.window(limit)?.elements },
        Table { pairs, default } => Node::Table {
            fwd: pairs.iter().copied().collect(),
            back: pairs.iter().map(|&(a, b)| (b, a)).collect(),
            default: Box::new(compile(default, limit)?),
        },
        Exchange { domain, map } => Node::Exchange { domain, map: Box::new(compile(map, limit)?) },
        FixOn { fixed, map } => Node::FixOn { fixed, map: Box::new(compile(map, limit)?) },
        Pairwise { outer, rows, default_row } => Node::Pairwise {
            outer: Box::new(compile(outer, limit)?),
            rows: rows.iter().map(|r| compile(r, limit)).collect::<Result<_>>()?,
            default_row: Box::new(compile(default_row, limit)?),
        },
        Compose { first, then } => {
            Node::Compose { first: Box::new(compile(first, limit)?), then: Box::new(compile(then, limit)?) }
        }
    })
}

impl<'a> Evaluator<'a> {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// `f(x)`, or `None` when the value is not available at this limit.
    pub fn apply(&self, x: u64) -> Result<Option<u64>> {
        apply(&self.node, x, self.limit)
    }

    /// The unique preimage of `y`, or `None` if there is none (or it is
    /// not available at this limit).
    pub fn inverse(&self, y: u64) -> Result<Option<u64>> {
        inverse(&self.node, y, self.limit)
    }
}

fn rank(sorted: &[u64], x: u64) -> Option<usize> {
    sorted.binary_search(&x).ok()
}

fn apply(node: &Node<'_>, x: u64, limit: u64) -> Result<Option<u64>> {
    match node {
        Node::Closed(expr) => Ok(apply_closed(expr, x)),
        Node::Enumeration { elems } => Ok(elems.get(x as usize).copied()),
        Node::Matching { from, to } => {
            if x >= limit {
                return Ok(None);
            }
            match rank(from, x) {
                Some(r) => Ok(to.get(r).copied()),
                None => Ok(Some(x)),
            }
        }
        Node::Table { fwd, default, .. } => match fwd.get(&x) {
            Some(&y) => Ok(Some(y)),
            None => apply(default, x, limit),
        },
        Node::Exchange { domain, map } => {
            if domain.contains(x)? {
                return apply(map, x, limit);
            }
            if let Some(p) = inverse(map, x, limit)? {
                if domain.contains(p)? {
                    return Ok(Some(p));
                }
            }
            Ok(Some(x))
        }
        Node::FixOn { fixed, map } => {
            if fixed.contains(x)? {
                Ok(Some(x))
            } else {
                apply(map, x, limit)
            }
        }
        Node::Pairwise { outer, rows, default_row } => {
            let (i, j) = unpair(x);
            let row = rows.get(i as usize).unwrap_or(default_row);
            match (apply(outer, i, limit)?, apply(row, j, limit)?) {
                (Some(a), Some(b)) => Ok(pair(a, b).ok()),
                _ => Ok(None),
            }
        }
        Node::Compose { first, then } => match apply(first, x, limit)? {
            Some(y) => apply(then, y, limit),
            None => Ok(None),
        },
    }
}

fn inverse(node: &Node<'_>, y: u64, limit: u64) -> Result<Option<u64>> {
    match node {
        Node::Closed(expr) => Ok(inverse_closed(expr, y)),
        Node::Enumeration { elems } => Ok(rank(elems, y).map(|r| r as u64)),
        Node::Matching { from, to } => {
            if y >= limit {
                return Ok(None);
            }
            if let Some(r) = rank(to, y) {
                return Ok(from.get(r).copied());
            }
            Ok(if rank(from, y).is_some() { None } else { Some(y) })
        }
        Node::Table { fwd, back, default } => {
            if let Some(&x) = back.get(&y) {
                return Ok(Some(x));
            }
            match inverse(default, y, limit)? {
                Some(x) if !fwd.contains_key(&x) => Ok(Some(x)),
                _ => Ok(None),
            }
        }
        Node::Exchange { .. } => {
            // involution
            let x = apply(node, y, limit)?;
            Ok(x)
        }
        Node::FixOn { fixed, map } => {
            if fixed.contains(y)? {
                return Ok(Some(y));
            }
            match inverse(map, y, limit)? {
                Some(p) if !fixed.contains(p)? => Ok(Some(p)),
                _ => Ok(None),
            }
        }
        Node::Pairwise { outer, rows, default_row } => {
            let (a, b) = unpair(y);
            let Some(i) = inverse(outer, a, limit)? else { return Ok(None) };
            let row = rows.get(i as usize).unwrap_or(default_row);
            let Some(j) = inverse(row, b, limit)? else { return Ok(None) };
            Ok(pair(i, j).ok())
        }
        Node::Compose { first, then } => match inverse(then, y, limit)? {
            Some(m) => inverse(first, m, limit),
            None => Ok(None),
        },
    }
}

fn apply_closed(expr: &InjectionExpr, x: u64) -> Option<u64> {
    match expr {
        InjectionExpr::Identity => Some(x),
        InjectionExpr::Shift { by } => x.checked_add(*by),
        InjectionExpr::Affine { mul, add } => x.checked_mul(*mul)?.checked_add(*add),
        InjectionExpr::Power { exp } => x.checked_pow(*exp),
        InjectionExpr::SwapPairs => Some(x ^ 1),
        InjectionExpr::Segments { segments } => {
            let idx = segments.partition_point(|&(s, _)| s <= x);
            if idx == 0 {
                Some(x)
            } else {
                let (s, t) = segments[idx - 1];
                t.checked_add(x - s)
            }
        }
        _ => unreachable!("not a closed-form map"),
    }
}

fn inverse_closed(expr: &InjectionExpr, y: u64) -> Option<u64> {
    match expr {
        InjectionExpr::Identity => Some(y),
        InjectionExpr::Shift { by } => y.checked_sub(*by),
        InjectionExpr::Affine { mul, add } => {
            let d = y.checked_sub(*add)?;
            (d % mul == 0).then_some(d / mul)
        }
        InjectionExpr::Power { exp } => {
            let r = y.nth_root(*exp);
            (r.checked_pow(*exp) == Some(y)).then_some(r)
        }
        InjectionExpr::SwapPairs => Some(y ^ 1),
        InjectionExpr::Segments { segments } => {
            let mut candidates = Vec::new();
            if segments.first().map_or(true, |&(s, _)| y < s) {
                candidates.push(y);
            }
            for (i, &(s, t)) in segments.iter().enumerate() {
                let span = segments.get(i + 1).map(|&(next, _)| next - s);
                if y >= t && span.map_or(true, |len| y - t < len) {
                    candidates.push(s + (y - t));
                }
            }
            candidates.into_iter().find(|&x| apply_closed(expr, x) == Some(y))
        }
        _ => unreachable!("not a closed-form map"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_invert() {
        let maps = [
            InjectionExpr::Identity,
            InjectionExpr::shift(3),
            InjectionExpr::affine(2, 1),
            InjectionExpr::power(2),
            InjectionExpr::SwapPairs,
            InjectionExpr::Segments { segments: vec![(5, 100), (8, 200)] },
        ];
        for m in maps {
            let ev = m.evaluator(1000).unwrap();
            for x in 0..50 {
                let y = ev.apply(x).unwrap().unwrap();
                assert_eq!(ev.inverse(y).unwrap(), Some(x), "{m:?} at {x}");
            }
        }
    }

    #[test]
    fn enumeration_of_evens() {
        let f = InjectionExpr::enumeration(SetExpr::evens());
        let ev = f.evaluator(100).unwrap();
        assert_eq!(ev.apply(7).unwrap(), Some(14));
        assert_eq!(ev.apply(50).unwrap(), None);
        assert_eq!(ev.inverse(14).unwrap(), Some(7));
        assert_eq!(ev.inverse(13).unwrap(), None);
    }

    #[test]
    fn matching_moves_from_onto_to() {
        // odds -> multiples of 4, evens fixed except multiples of 4 have no preimage among evens
        let f = InjectionExpr::Matching { from: Box::new(SetExpr::odds()), to: Box::new(SetExpr::arithmetic(1, 4)) };
        let ev = f.evaluator(1000).unwrap();
        assert_eq!(ev.apply(1).unwrap(), Some(1));
        assert_eq!(ev.apply(3).unwrap(), Some(5));
        assert_eq!(ev.apply(2).unwrap(), Some(2));
        assert_eq!(ev.inverse(5).unwrap(), Some(3));
        assert_eq!(ev.inverse(3).unwrap(), None);
    }

    #[test]
    fn table_rejects_collisions() {
        let f = InjectionExpr::table(vec![(1, 5), (2, 5)]);
        assert!(matches!(f.validate(), Err(Error::Injectivity { .. })));
    }

    #[test]
    fn pairwise_acts_on_coordinates() {
        let f = InjectionExpr::Pairwise {
            outer: Box::new(InjectionExpr::affine(2, 0)),
            rows: vec![],
            default_row: Box::new(InjectionExpr::affine(2, 0)),
        };
        let ev = f.evaluator(100).unwrap();
        let z = pair(3, 4).unwrap();
        assert_eq!(ev.apply(z).unwrap(), Some(pair(6, 8).unwrap()));
        assert_eq!(ev.inverse(pair(6, 8).unwrap()).unwrap(), Some(z));
    }

    #[test]
    fn increasing_check() {
        assert!(InjectionExpr::power(2).check_increasing(100, 1 << 20).is_ok());
        assert!(matches!(InjectionExpr::SwapPairs.check_increasing(10, 100), Err(Error::NotIncreasing { at: 1 })));
    }
}
