//! Finite witness search: arithmetic progressions, homothetic grids,
//! finite-sums sets, Ramsey blocks and column profiles.
//!
//! Every search is deterministic and returns the least witness in a fixed
//! order, so reports are reproducible.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sets::eval::{finite_sums, FS_CAP};
use crate::sets::{pair, unpair, BaseSpace, Point, SetExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApWitness {
    pub start: u64,
    pub step: u64,
    pub length: u64,
}

impl ApWitness {
    pub fn terms(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.length).map(move |i| self.start + i * self.step)
    }

    pub fn check(&self, set: &SetExpr) -> Result<bool> {
        if self.step == 0 {
            return Ok(false);
        }
        let f = set.member_fn(self.start + self.length * self.step + 1);
        for t in self.terms() {
            if !f(t)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApResult {
    pub length: u64,
    pub witness: Option<ApWitness>,
}

/// Longest arithmetic progression in a finite set.
///
/// Ties go to the smallest step, then the smallest start. Each progression
/// is grown from a pair with no predecessor in the set, so the work is
/// `O(|A|^2)` plus the total length of the maximal progressions.
pub fn longest_ap(elements: &[u64]) -> ApResult {
    let mut a: Vec<u64> = elements.to_vec();
    a.sort_unstable();
    a.dedup();
    match a.len() {
        0 => return ApResult { length: 0, witness: None },
        1 => return ApResult { length: 1, witness: Some(ApWitness { start: a[0], step: 1, length: 1 }) },
        _ => {}
    }
    let set: HashSet<u64> = a.iter().copied().collect();
    let mut best = ApWitness { start: a[0], step: a[1] - a[0], length: 2 };
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let d = a[j] - a[i];
            if a[i] >= d && set.contains(&(a[i] - d)) {
                continue;
            }
            // even a full run from here could not beat the best
            let room = (a[a.len() - 1] - a[i]) / d + 1;
            if room < best.length || (room == best.length && (d, a[i]) >= (best.step, best.start)) {
                continue;
            }
            let mut len = 2;
            let mut next = a[j];
            while let Some(n) = next.checked_add(d) {
                if !set.contains(&n) {
                    break;
                }
                len += 1;
                next = n;
            }
            let better = len > best.length || (len == best.length && (d, a[i]) < (best.step, best.start));
            if better {
                best = ApWitness { start: a[i], step: d, length: len };
            }
        }
    }
    ApResult { length: best.length, witness: Some(best) }
}

/// `O(|A|^3)` reference search: every pair, extended by linear lookups.
pub fn longest_ap_brute(elements: &[u64]) -> ApResult {
    let mut a: Vec<u64> = elements.to_vec();
    a.sort_unstable();
    a.dedup();
    if a.is_empty() {
        return ApResult { length: 0, witness: None };
    }
    let mut best = ApWitness { start: a[0], step: 1, length: 1 };
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let d = a[j] - a[i];
            let mut len = 2;
            let mut next = a[j] + d;
            while a.contains(&next) {
                len += 1;
                next += d;
            }
            let better = len > best.length
                || (len == best.length && best.length >= 2 && (d, a[i]) < (best.step, best.start))
                || (len == 2 && best.length == 1);
            if better {
                best = ApWitness { start: a[i], step: d, length: len };
            }
        }
    }
    ApResult { length: best.length, witness: Some(best) }
}

/// `v + α·{1..k}^dim`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridWitness {
    pub v: Vec<u64>,
    pub alpha: u64,
    pub k: u64,
}

impl GridWitness {
    /// Encoded points of a two-dimensional grid, in row order.
    pub fn points(&self) -> Result<Vec<u64>> {
        match self.v.as_slice() {
            [v0] => Ok((1..=self.k).map(|a| v0 + self.alpha * a).collect()),
            [v0, v1] => {
                let mut out = Vec::new();
                for a in 1..=self.k {
                    for b in 1..=self.k {
                        out.push(pair(v0 + self.alpha * a, v1 + self.alpha * b)?);
                    }
                }
                Ok(out)
            }
            _ => Err(Error::Malformed(format!("grid witnesses of dimension {} are not supported", self.v.len()))),
        }
    }

    pub fn check(&self, set: &SetExpr) -> Result<bool> {
        if self.alpha == 0 || self.k == 0 {
            return Ok(false);
        }
        let pts = self.points()?;
        let f = set.member_fn(pts.iter().copied().max().unwrap_or(0) + 1);
        for p in pts {
            if !f(p)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Searches for `v + α·{1..k}^2` inside a window of ω².
///
/// Order: `α` ascending, then `v` lexicographically. Only grids inside the
/// bounding box of the window are considered, so `α ≤ width / k`.
pub fn find_grid_copy(points: &[u64], k: u64) -> Option<GridWitness> {
    if k == 0 || points.is_empty() {
        return None;
    }
    let pts: HashSet<(u64, u64)> = points.iter().map(|&z| unpair(z)).collect();
    let max_i = pts.iter().map(|p| p.0).max()?;
    let max_j = pts.iter().map(|p| p.1).max()?;
    let width = max_i.max(max_j) + 1;
    for alpha in 1..=width / k {
        let span = alpha * k;
        if span > max_i || span > max_j {
            break;
        }
        for v0 in 0..=max_i - span {
            for v1 in 0..=max_j - span {
                let fits = (1..=k).all(|a| (1..=k).all(|b| pts.contains(&(v0 + alpha * a, v1 + alpha * b))));
                if fits {
                    return Some(GridWitness { v: vec![v0, v1], alpha, k });
                }
            }
        }
    }
    None
}

/// One-dimensional grids `v + α·{1..k}` are progressions of length `k`.
pub fn find_grid_copy_1d(elements: &[u64], k: u64) -> Option<GridWitness> {
    if k == 0 {
        return None;
    }
    let set: HashSet<u64> = elements.iter().copied().collect();
    let max = *elements.iter().max()?;
    for alpha in 1..=(max + 1) / k {
        for v in 0..=max.saturating_sub(alpha * k) {
            if (1..=k).all(|a| set.contains(&(v + alpha * a))) {
                return Some(GridWitness { v: vec![v], alpha, k });
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsCheck {
    pub contained: bool,
    pub sums: Vec<u64>,
    /// Least finite sum outside the set.
    pub missing: Option<u64>,
}

/// Whether every nonempty-subset sum of `b` lies in `set`.
pub fn fs_contained(b: &[u64], set: &SetExpr) -> Result<FsCheck> {
    if b.len() > FS_CAP {
        return Err(Error::EffortExceeded(format!("|B| = {} exceeds the cap of {FS_CAP}", b.len())));
    }
    let sums = finite_sums(b, u64::MAX)?;
    let f = set.member_fn(sums.last().copied().unwrap_or(0).saturating_add(1));
    let mut missing = None;
    for &s in &sums {
        if !f(s)? {
            missing = Some(s);
            break;
        }
    }
    Ok(FsCheck { contained: missing.is_none(), sums, missing })
}

/// Lexicographically least `B` of `n` distinct positive elements with
/// `FS(B) ⊆ A`, where `A` is given by a window; sums at or beyond the window
/// bound count as outside.
pub fn find_fs_generator(window: &[u64], bound: u64, n: usize) -> Option<Vec<u64>> {
    let a: Vec<u64> = {
        let mut v: Vec<u64> = window.iter().copied().filter(|&x| x > 0 && x < bound).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let set: HashSet<u64> = a.iter().copied().collect();
    fn go(a: &[u64], set: &HashSet<u64>, from: usize, n: usize, chosen: &mut Vec<u64>, sums: &mut Vec<u64>) -> bool {
        if chosen.len() == n {
            return true;
        }
        for idx in from..a.len() {
            if a.len() - idx < n - chosen.len() {
                return false;
            }
            let b = a[idx];
            if !sums.iter().all(|&s| set.contains(&(s + b))) {
                continue;
            }
            let added: Vec<u64> = std::iter::once(b).chain(sums.iter().map(|&s| s + b)).collect();
            let keep = sums.len();
            sums.extend(added);
            chosen.push(b);
            if go(a, set, idx + 1, n, chosen, sums) {
                return true;
            }
            chosen.pop();
            sums.truncate(keep);
        }
        false
    }
    if n == 0 {
        return Some(Vec::new());
    }
    let mut chosen = Vec::new();
    let mut sums = Vec::new();
    go(&a, &set, 0, n, &mut chosen, &mut sums).then_some(chosen)
}

/// Reference search over all `n`-subsets in lexicographic order.
pub fn find_fs_generator_brute(window: &[u64], bound: u64, n: usize) -> Option<Vec<u64>> {
    let a: Vec<u64> = {
        let mut v: Vec<u64> = window.iter().copied().filter(|&x| x > 0 && x < bound).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let set: HashSet<u64> = a.iter().copied().collect();
    let mut idx: Vec<usize> = (0..n).collect();
    if n > a.len() {
        return None;
    }
    loop {
        let b: Vec<u64> = idx.iter().map(|&i| a[i]).collect();
        let ok = (1u32..1 << n).all(|mask| {
            let s: u64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| b[i]).sum();
            set.contains(&s)
        });
        if ok {
            return Some(b);
        }
        // next combination in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if idx[i] < a.len() - n + i {
                break;
            }
            if i == 0 {
                return None;
            }
        }
        idx[i] += 1;
        for j in i + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub const RAMSEY_BLOCK_CAP: usize = 12;

/// Least `B` in colex order with `|B| = m` and `[B]^n ⊆ A`, for `A` given by
/// a window of `[ω]^n` codes.
pub fn ramsey_block(codes: &[u64], n: u32, m: usize) -> Result<Option<Vec<u64>>> {
    if !(2..=3).contains(&n) {
        return Err(Error::Precondition(format!("Ramsey blocks are searched for n in {{2,3}}, got {n}")));
    }
    if m > RAMSEY_BLOCK_CAP {
        return Err(Error::EffortExceeded(format!("block size {m} exceeds the cap of {RAMSEY_BLOCK_CAP}")));
    }
    let space = BaseSpace::NSubsets { n };
    let set: HashSet<u64> = codes.iter().copied().collect();
    let mut vertices: Vec<u64> = codes
        .iter()
        .flat_map(|&c| match space.decode(c) {
            Point::Subset(v) => v,
            _ => unreachable!("subset space"),
        })
        .collect();
    vertices.sort_unstable();
    vertices.dedup();
    if m < n as usize {
        // [B]^n is empty; the colex-least m-set of naturals
        return Ok(Some((0..m as u64).collect()));
    }

    fn compatible(space: BaseSpace, set: &HashSet<u64>, n: u32, chosen: &[u64], x: u64) -> bool {
        let k = n as usize - 1;
        // every (n-1)-subset of chosen together with x
        let mut idx: Vec<usize> = (0..k).collect();
        if chosen.len() < k {
            return true;
        }
        loop {
            let mut subset: Vec<u64> = idx.iter().map(|&i| chosen[i]).collect();
            subset.push(x);
            let code = space.encode(&Point::Subset(subset)).expect("distinct elements");
            if !set.contains(&code) {
                return false;
            }
            let mut i = k;
            loop {
                if i == 0 {
                    return true;
                }
                i -= 1;
                if idx[i] < chosen.len() - k + i {
                    break;
                }
                if i == 0 {
                    return true;
                }
            }
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    // choose elements from the top down; the first complete choice is
    // colex-least because each level tries candidates in ascending order
    fn go(space: BaseSpace, set: &HashSet<u64>, n: u32, verts: &[u64], upper: usize, m: usize, chosen: &mut Vec<u64>) -> bool {
        let need = m - chosen.len();
        if need == 0 {
            return true;
        }
        for pos in need - 1..upper {
            let x = verts[pos];
            if !compatible(space, set, n, chosen, x) {
                continue;
            }
            chosen.push(x);
            if go(space, set, n, verts, pos, m, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }

    let mut chosen = Vec::new();
    if go(space, &set, n, &vertices, vertices.len(), m, &mut chosen) {
        chosen.sort_unstable();
        Ok(Some(chosen))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnProfile {
    /// Points per column `{k} × ω`, for columns meeting the window.
    pub counts: BTreeMap<u64, u64>,
    pub max: u64,
    /// Least column attaining the maximum.
    pub argmax: Option<u64>,
}

pub fn column_profile(points: &[u64]) -> ColumnProfile {
    let mut counts = BTreeMap::new();
    for &z in points {
        *counts.entry(unpair(z).0).or_insert(0u64) += 1;
    }
    let mut max = 0;
    let mut argmax = None;
    for (&k, &c) in &counts {
        if c > max {
            max = c;
            argmax = Some(k);
        }
    }
    ColumnProfile { counts, max, argmax }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn ap_examples() {
        let r = longest_ap(&(0..10).collect::<Vec<_>>());
        assert_eq!(r.witness, Some(ApWitness { start: 0, step: 1, length: 10 }));
        let r = longest_ap(&[1, 25, 49, 100]);
        assert_eq!(r.witness, Some(ApWitness { start: 1, step: 24, length: 3 }));
        let sq = SetExpr::Squares.window(2501).unwrap();
        let r = longest_ap(&sq.elements);
        assert_eq!(r.witness, Some(ApWitness { start: 1, step: 24, length: 3 }));
        assert_eq!(longest_ap(&[]).length, 0);
    }

    #[test]
    fn ap_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let size = rng.gen_range(0..=25);
            let a: Vec<u64> = (0..size).map(|_| rng.gen_range(0..80)).collect();
            assert_eq!(longest_ap(&a), longest_ap_brute(&a), "{a:?}");
        }
    }

    fn grid_window(pred: impl Fn(u64, u64) -> bool, side: u64) -> Vec<u64> {
        let mut out = Vec::new();
        for i in 0..side {
            for j in 0..side {
                if pred(i, j) {
                    out.push(pair(i, j).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn grid_examples() {
        let full = grid_window(|_, _| true, 5);
        assert_eq!(find_grid_copy(&full, 2), Some(GridWitness { v: vec![0, 0], alpha: 1, k: 2 }));
        let d = grid_window(|i, j| i >= j, 10);
        assert_eq!(find_grid_copy(&d, 2), Some(GridWitness { v: vec![1, 0], alpha: 1, k: 2 }));
        assert_eq!(find_grid_copy(&[], 1), None);
    }

    #[test]
    fn fs_examples() {
        let all = fs_contained(&[1, 2, 4], &SetExpr::all()).unwrap();
        assert!(all.contained);
        assert_eq!(all.sums, (1..=7).collect::<Vec<_>>());
        assert!(!fs_contained(&[1, 2], &SetExpr::evens()).unwrap().contained);
        let ev = fs_contained(&[2, 4, 8], &SetExpr::evens()).unwrap();
        assert!(ev.contained);
        assert_eq!(ev.sums, vec![2, 4, 6, 8, 10, 12, 14]);
    }

    #[test]
    fn fs_generator_examples() {
        let evens = SetExpr::evens().window(100).unwrap();
        assert_eq!(find_fs_generator(&evens.elements, 100, 3), Some(vec![2, 4, 6]));
        assert_eq!(find_fs_generator(&[1, 2, 3], 4, 2), Some(vec![1, 2]));
        let odds = SetExpr::odds().window(100).unwrap();
        assert_eq!(find_fs_generator(&odds.elements, 100, 2), None);
    }

    #[test]
    fn ramsey_examples() {
        let s2 = BaseSpace::NSubsets { n: 2 };
        let code = |i: u64, j: u64| s2.encode(&Point::Subset(vec![i, j])).unwrap();
        let mut all = Vec::new();
        let mut even = Vec::new();
        for j in 0..6 {
            for i in 0..j {
                all.push(code(i, j));
                if (i + j) % 2 == 0 {
                    even.push(code(i, j));
                }
            }
        }
        assert_eq!(ramsey_block(&all, 2, 3).unwrap(), Some(vec![0, 1, 2]));
        assert_eq!(ramsey_block(&even, 2, 3).unwrap(), Some(vec![0, 2, 4]));
        assert_eq!(ramsey_block(&[], 2, 2).unwrap(), None);
        assert!(ramsey_block(&all, 2, 13).is_err());
    }

    #[test]
    fn column_examples() {
        let d = grid_window(|i, j| i >= j, 10);
        let p = column_profile(&d);
        assert!(p.counts.iter().all(|(&k, &c)| c == k + 1));
        assert_eq!(p.max, 10);
        assert_eq!(column_profile(&[]).max, 0);
    }
}
