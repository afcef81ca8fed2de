//! Executable isomorphism and counterexample constructions.
//!
//! Every construction returns a typed result together with a
//! [`WitnessReport`] listing the window checks that were run on it.

mod antihomog;
mod bi_invariance;
mod erdos_ulam;
mod homogeneity;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::ideal::{member, Effort, IdealDescriptor, VerdictKind};
use crate::sets::{InjectionExpr, SetExpr};

pub use antihomog::{
    antihomog_partition, antihomog_partition_fn, removal_refuter, AntihomogBlock, AntihomogStats, BlockMap,
    ANTIHOMOG_MAX,
};
pub use bi_invariance::{c1_builder, c1_pair_extraction, C1Branch, C1Build, C1Pairs};
pub use erdos_ulam::{
    eu_dense_counterexample, eu_nondense_counterexample, DenseCase, DenseCase1, DenseCase2, DenseBlock, EuDense,
    EuNondense, NondenseBlock, EU_NONDENSE_MAX,
};
pub use homogeneity::{
    costar_witness, edfin_witness, gallai2_witness, idd_enum_witness, product_witness, superset_closure, EdFinWitness,
    Gallai2Witness, GallaiBlock, IddEnumWitness, SupersetClosure,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of a construction plus everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub construction: String,
    pub parameters: Value,
    pub window: u64,
    pub checks: Vec<CheckResult>,
    pub outcome: Outcome,
    /// First failing check's data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
    pub data: Value,
}

impl WitnessReport {
    pub fn new(construction: &str, parameters: Value, window: u64) -> Self {
        WitnessReport {
            construction: construction.into(),
            parameters,
            window,
            checks: Vec::new(),
            outcome: Outcome::Pass,
            counterexample: None,
            data: Value::Null,
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) -> &mut Self {
        let detail = detail.into();
        if !passed {
            self.outcome = Outcome::Fail;
            if self.counterexample.is_none() {
                self.counterexample = Some(serde_json::json!({ "check": name, "detail": detail }));
            }
        }
        self.checks.push(CheckResult { name: name.into(), passed, detail });
        self
    }

    pub fn with_data(mut self, data: Value) -> Self {
        self.data = data;
        self
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

/// A map `f` from `source` onto `target` with the contract
/// `X ∈ I ⇔ f[X] ∈ I` for subsets `X` of the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoWitness {
    pub source: SetExpr,
    pub target: SetExpr,
    pub map: InjectionExpr,
    pub contract: String,
}

/// Bijectivity of a witness between `source ∩ [0, bound)` and `target ∩ [0, bound)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub bound: u64,
    pub source_points: u64,
    /// Source points whose image is not available at the evaluation limit.
    pub undefined: u64,
    pub injective: bool,
    pub into_target: bool,
    /// Every target point below `bound` has a source preimage.
    pub covered: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<String>,
}

impl WindowCheck {
    pub fn ok(&self) -> bool {
        self.injective && self.into_target && self.covered
    }
}

impl IsoWitness {
    pub fn new(source: SetExpr, target: SetExpr, map: InjectionExpr, contract: &str) -> Self {
        IsoWitness { source, target, map, contract: contract.into() }
    }

    /// Images of the source points below `bound`, with enumeration-based
    /// pieces materialized up to `limit`.
    pub fn images(&self, bound: u64, limit: u64) -> Result<Vec<(u64, Option<u64>)>> {
        let ev = self.map.evaluator(limit)?;
        self.source.window(bound)?.elements.iter().map(|&x| Ok((x, ev.apply(x)?))).collect()
    }

    pub fn check_window(&self, bound: u64, limit: u64) -> Result<WindowCheck> {
        let ev = self.map.evaluator(limit)?;
        let sources = self.source.window(bound)?.elements;
        let mut out = WindowCheck {
            bound,
            source_points: sources.len() as u64,
            undefined: 0,
            injective: true,
            into_target: true,
            covered: true,
            violation: None,
        };
        let mut seen: HashMap<u64, u64> = HashMap::new();
        for &x in &sources {
            let Some(y) = ev.apply(x)? else {
                out.undefined += 1;
                continue;
            };
            if let Some(prev) = seen.insert(y, x) {
                out.injective = false;
                out.violation.get_or_insert(format!("{prev} and {x} both map to {y}"));
            }
            if !self.target.contains(y)? {
                out.into_target = false;
                out.violation.get_or_insert(format!("f({x}) = {y} lies outside the target"));
            }
        }
        for &y in &self.target.window(bound)?.elements {
            let hit = match ev.inverse(y)? {
                Some(x) => self.source.contains(x)? && ev.apply(x)? == Some(y),
                None => false,
            };
            if !hit {
                out.covered = false;
                out.violation.get_or_insert(format!("target point {y} has no preimage"));
            }
        }
        Ok(out)
    }

    /// Checks at `small < large` and that the two checks agree on `[0, small)`.
    pub fn check_two(&self, small: u64, large: u64, limit: u64) -> Result<(WindowCheck, WindowCheck, bool)> {
        if small >= large {
            return Err(Error::Precondition("window bounds must satisfy small < large".into()));
        }
        let a = self.check_window(small, limit)?;
        let b = self.check_window(large, limit)?;
        let first = self.images(small, limit)?;
        let second: HashMap<u64, Option<u64>> = self.images(large, limit)?.into_iter().collect();
        let consistent = first.iter().all(|(x, y)| second.get(x) == Some(y));
        Ok((a, b, consistent))
    }
}

/// Verdicts of `X` and `f[X]` for one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSample {
    pub set: SetExpr,
    pub source: VerdictKind,
    pub image: VerdictKind,
    /// `None` when either side is undecided.
    pub agrees: Option<bool>,
}

/// Membership transfer of a witness on a named finite test family.
pub fn transfer(ideal: &IdealDescriptor, map: &InjectionExpr, family: &[SetExpr], effort: &Effort) -> Result<Vec<TransferSample>> {
    family
        .iter()
        .map(|x| {
            let a = member(ideal, x, effort)?;
            let b = member(ideal, &SetExpr::image(map.clone(), x.clone()), effort)?;
            let decided = a.kind() != VerdictKind::Unknown && b.kind() != VerdictKind::Unknown;
            Ok(TransferSample {
                set: x.clone(),
                source: a.kind(),
                image: b.kind(),
                agrees: decided.then(|| a.is_in() == b.is_in()),
            })
        })
        .collect()
}

pub fn window_detail(c: &WindowCheck) -> String {
    match &c.violation {
        Some(v) => v.clone(),
        None => format!("{} source points below {}, {} undefined", c.source_points, c.bound, c.undefined),
    }
}
