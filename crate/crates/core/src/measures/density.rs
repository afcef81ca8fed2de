use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::num::{self, rat_u, Rational};
use crate::sets::eval::SCAN_CAP;
use crate::sets::SetExpr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: u64,
    pub count: u64,
    #[serde(with = "num::serde_rational")]
    pub ratio: Rational,
}

/// `|A ∩ [0, N)| / N` with dyadic checkpoint envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub bound: u64,
    pub count: u64,
    #[serde(with = "num::serde_rational")]
    pub ratio: Rational,
    /// Checkpoints `2^k < N` followed by `N` itself.
    pub checkpoints: Vec<Checkpoint>,
    /// Extremes over the second half of the checkpoints.
    #[serde(with = "num::serde_rational")]
    pub liminf: Rational,
    #[serde(with = "num::serde_rational")]
    pub limsup: Rational,
}

pub fn dyadic_checkpoints(bound: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = (0..64).map(|k| 1u64 << k).take_while(|&c| c < bound).collect();
    cps.push(bound);
    cps
}

/// `|A ∩ [0, c)|` for each checkpoint `c` (ascending).
pub fn prefix_counts(set: &SetExpr, cps: &[u64]) -> Result<Vec<u64>> {
    let last = cps.last().copied().unwrap_or(0);
    if last <= SCAN_CAP {
        let w = set.window(last)?;
        return Ok(cps.iter().map(|&c| w.elements.partition_point(|&x| x < c) as u64).collect());
    }
    cps.iter()
        .map(|&c| set.count_range(&BigUint::default(), &BigUint::from(c)).map(|b| b.to_u64().expect("count fits")))
        .collect()
}

pub fn density_window(set: &SetExpr, bound: u64) -> Result<DensityEstimate> {
    set.space()?;
    if bound == 0 {
        return Err(crate::Error::Precondition("density needs a window bound of at least 1".into()));
    }
    let cps = dyadic_checkpoints(bound);
    let counts = prefix_counts(set, &cps)?;
    let checkpoints: Vec<Checkpoint> =
        cps.iter().zip(&counts).map(|(&n, &count)| Checkpoint { n, count, ratio: rat_u(count, n) }).collect();
    let tail = &checkpoints[checkpoints.len() / 2..];
    let liminf = tail.iter().map(|c| c.ratio.clone()).min().expect("nonempty");
    let limsup = tail.iter().map(|c| c.ratio.clone()).max().expect("nonempty");
    let last = checkpoints.last().expect("nonempty");
    Ok(DensityEstimate { bound, count: last.count, ratio: last.ratio.clone(), checkpoints, liminf, limsup })
}

/// `|A ∩ X ∩ [0, N)| / |X ∩ [0, N)|`, the density of `A` relative to `X`.
pub fn relative_density(set: &SetExpr, carrier: &SetExpr, bound: u64) -> Result<Option<Rational>> {
    let inside = SetExpr::intersection(vec![set.clone(), carrier.clone()]);
    let a = prefix_counts(&inside, &[bound])?[0];
    let x = prefix_counts(carrier, &[bound])?[0];
    Ok((x > 0).then(|| rat_u(a, x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;
    use num_traits::Zero;

    #[test]
    fn density_examples() {
        assert_eq!(density_window(&SetExpr::evens(), 10).unwrap().ratio, rat(1, 2));
        assert_eq!(density_window(&SetExpr::Squares, 1_000_000).unwrap().ratio, rat(1000, 1_000_000));
        assert!(density_window(&SetExpr::empty(), 77).unwrap().ratio.is_zero());
    }

    #[test]
    fn envelope_is_ordered() {
        let e = density_window(&SetExpr::complement(SetExpr::Squares), 1 << 12).unwrap();
        assert!(e.liminf <= e.limsup);
        assert_eq!(e.checkpoints.len(), 13);
    }

    #[test]
    fn relative_density_of_multiples_of_four() {
        let r = relative_density(&SetExpr::arithmetic(0, 4), &SetExpr::evens(), 1 << 12).unwrap();
        assert_eq!(r, Some(rat(1, 2)));
    }
}
