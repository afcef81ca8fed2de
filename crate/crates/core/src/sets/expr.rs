use serde::{Deserialize, Serialize};

use super::injection::InjectionExpr;
use super::schedule::GridSchedule;
use super::space::{BaseSpace, Point};
use crate::error::{Error, Result};
use crate::num::{self, Rational};

/// Symbolic description of a subset of a base space.
///
/// All elements are stored and reported in their ω-encoding (see
/// [`BaseSpace`]). The JSON form is an object tagged by `"kind"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetExpr {
    Empty {
        #[serde(default, with = "space_name")]
        space: BaseSpace,
    },
    All {
        #[serde(default, with = "space_name")]
        space: BaseSpace,
    },
    Explicit {
        elements: Vec<u64>,
        #[serde(default, with = "space_name")]
        space: BaseSpace,
    },
    /// Finite set given by decoded points, e.g. `[[3,1],[4,2]]` in ω².
    Points {
        points: Vec<Point>,
        #[serde(with = "space_name")]
        space: BaseSpace,
    },
    Cofinite {
        excluded: Vec<u64>,
        #[serde(default, with = "space_name")]
        space: BaseSpace,
    },
    Squares,
    Powers {
        base: u64,
    },
    Arithmetic {
        #[serde(default)]
        start: u64,
        step: i64,
    },
    FsSet {
        generators: Vec<u64>,
    },
    BlockRule {
        schedule: GridSchedule,
        rule: BlockRule,
        /// Restricts the rule to blocks whose index lies in this set.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blocks: Option<Box<SetExpr>>,
    },
    Union {
        of: Vec<SetExpr>,
    },
    Intersection {
        of: Vec<SetExpr>,
    },
    Difference {
        left: Box<SetExpr>,
        right: Box<SetExpr>,
    },
    Complement {
        of: Box<SetExpr>,
    },
    Image {
        map: Box<InjectionExpr>,
        set: Box<SetExpr>,
    },
    Preimage {
        map: Box<InjectionExpr>,
        set: Box<SetExpr>,
    },
    /// `{y : (at, y) ∈ set}` for product sets, or copy `at` of a two-copies set.
    Section {
        at: u64,
        set: Box<SetExpr>,
    },
    /// `D = {(i, j) ∈ ω² : i ≥ j}`.
    LowerTriangle,
    Rectangle {
        rows: Box<SetExpr>,
        cols: Box<SetExpr>,
    },
    /// `v + α·{1..side}²`.
    GridCopy {
        v: [u64; 2],
        alpha: u64,
        side: u64,
    },
    /// `{copy} × set` inside {0,1}×ω.
    Tagged {
        copy: u64,
        set: Box<SetExpr>,
    },
    /// `[set]^n`.
    Subsets {
        n: u32,
        set: Box<SetExpr>,
    },
    /// Analytic facts supplied with the set; always cross-checked against
    /// window statistics before use.
    Annotated {
        set: Box<SetExpr>,
        #[serde(default, with = "num::serde_rational_opt", skip_serializing_if = "Option::is_none")]
        density: Option<Rational>,
        /// Tolerance for the final window ratio around `density`.
        #[serde(default, with = "num::serde_rational_opt", skip_serializing_if = "Option::is_none")]
        envelope: Option<Rational>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summable: Option<bool>,
        #[serde(default)]
        justification: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BlockRule {
    All,
    #[serde(rename = "none")]
    Nothing,
    First { count: CountFn },
    Last { count: CountFn },
    /// Every `step`-th element of the block, starting at its minimum.
    Arithmetic { step: u64 },
}

/// Per-block element count, always capped at the block length.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "kebab-case")]
pub enum CountFn {
    Const { value: u64 },
    /// `⌊|I_n| · num / den⌋`
    Fraction { num: u64, den: u64 },
    /// `[coeff(n - lag) · 2^{k_{n - lag}}]` (nearest integer), zero for `n < lag`.
    ScaledPow2Kn { coeff: Coeff, lag: u64 },
    /// Explicit counts; zero past the end.
    Table { counts: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "seq", rename_all = "kebab-case")]
pub enum Coeff {
    Const {
        #[serde(with = "num::serde_rational")]
        value: Rational,
    },
    /// `1/n`, with `1/0` read as 1.
    Reciprocal,
}

impl SetExpr {
    pub fn empty() -> Self {
        SetExpr::Empty { space: BaseSpace::Omega }
    }
    pub fn all() -> Self {
        SetExpr::All { space: BaseSpace::Omega }
    }
    pub fn explicit(elements: impl IntoIterator<Item = u64>) -> Self {
        SetExpr::Explicit { elements: elements.into_iter().collect(), space: BaseSpace::Omega }
    }
    pub fn explicit_in(space: BaseSpace, elements: impl IntoIterator<Item = u64>) -> Self {
        SetExpr::Explicit { elements: elements.into_iter().collect(), space }
    }
    pub fn arithmetic(start: u64, step: u64) -> Self {
        SetExpr::Arithmetic { start, step: step as i64 }
    }
    pub fn evens() -> Self {
        SetExpr::arithmetic(0, 2)
    }
    pub fn odds() -> Self {
        SetExpr::arithmetic(1, 2)
    }
    pub fn powers(base: u64) -> Self {
        SetExpr::Powers { base }
    }
    pub fn union(of: Vec<SetExpr>) -> Self {
        SetExpr::Union { of }
    }
    pub fn intersection(of: Vec<SetExpr>) -> Self {
        SetExpr::Intersection { of }
    }
    pub fn difference(left: SetExpr, right: SetExpr) -> Self {
        SetExpr::Difference { left: Box::new(left), right: Box::new(right) }
    }
    pub fn complement(of: SetExpr) -> Self {
        SetExpr::Complement { of: Box::new(of) }
    }
    pub fn image(map: InjectionExpr, set: SetExpr) -> Self {
        SetExpr::Image { map: Box::new(map), set: Box::new(set) }
    }
    pub fn preimage(map: InjectionExpr, set: SetExpr) -> Self {
        SetExpr::Preimage { map: Box::new(map), set: Box::new(set) }
    }
    pub fn section(at: u64, set: SetExpr) -> Self {
        SetExpr::Section { at, set: Box::new(set) }
    }
    pub fn rectangle(rows: SetExpr, cols: SetExpr) -> Self {
        SetExpr::Rectangle { rows: Box::new(rows), cols: Box::new(cols) }
    }
    pub fn tagged(copy: u64, set: SetExpr) -> Self {
        SetExpr::Tagged { copy, set: Box::new(set) }
    }
    pub fn block_rule(schedule: GridSchedule, rule: BlockRule) -> Self {
        SetExpr::BlockRule { schedule, rule, blocks: None }
    }
    pub fn block_rule_on(schedule: GridSchedule, rule: BlockRule, blocks: SetExpr) -> Self {
        SetExpr::BlockRule { schedule, rule, blocks: Some(Box::new(blocks)) }
    }
    pub fn annotated_density(set: SetExpr, density: Rational, justification: &str) -> Self {
        SetExpr::Annotated {
            set: Box::new(set),
            density: Some(density),
            envelope: None,
            summable: None,
            justification: justification.to_string(),
        }
    }

    /// Base space the set lives in; also validates the tree.
    pub fn space(&self) -> Result<BaseSpace> {
        use SetExpr::*;
        match self {
            Empty { space } | All { space } | Explicit { space, .. } | Cofinite { space, .. } => Ok(*space),
            Points { points, space } => {
                for p in points {
                    space.encode(p)?;
                }
                Ok(*space)
            }
            Squares | Powers { .. } | FsSet { .. } => {
                if let Powers { base } = self {
                    if *base < 2 {
                        return Err(Error::Malformed(format!("powers need base >= 2, got {base}")));
                    }
                }
                Ok(BaseSpace::Omega)
            }
            Arithmetic { step, .. } => {
                if *step <= 0 {
                    Err(Error::Malformed(format!("arithmetic progression needs a positive step, got {step}")))
                } else {
                    Ok(BaseSpace::Omega)
                }
            }
            BlockRule { schedule, rule, blocks } => {
                schedule.validate()?;
                if let self::BlockRule::Arithmetic { step: 0 } = rule {
                    return Err(Error::Malformed("block arithmetic rule needs a positive step".into()));
                }
                if let Some(b) = blocks {
                    BaseSpace::Omega.expect(b.space()?)?;
                }
                Ok(BaseSpace::Omega)
            }
            Union { of } | Intersection { of } => {
                let mut it = of.iter();
                let first = match it.next() {
                    Some(e) => e.space()?,
                    None => return Ok(BaseSpace::Omega),
                };
                for e in it {
                    first.expect(e.space()?)?;
                }
                Ok(first)
            }
            Difference { left, right } => {
                let s = left.space()?;
                s.expect(right.space()?)?;
                Ok(s)
            }
            Complement { of } => of.space(),
            Image { set, .. } | Preimage { set, .. } => set.space(),
            Section { at, set } => match set.space()? {
                BaseSpace::TwoCopies if *at < 2 => Ok(BaseSpace::Omega),
                s if s.is_product() => Ok(BaseSpace::Omega),
                s => Err(Error::SpaceMismatch { expected: "product or two-copies".into(), found: s.to_string() }),
            },
            LowerTriangle | GridCopy { .. } => Ok(BaseSpace::OmegaSquared),
            Rectangle { rows, cols } => {
                BaseSpace::Omega.expect(rows.space()?)?;
                BaseSpace::Omega.expect(cols.space()?)?;
                Ok(BaseSpace::OmegaSquared)
            }
            Tagged { copy, set } => {
                if *copy > 1 {
                    return Err(Error::Malformed(format!("copy index must be 0 or 1, got {copy}")));
                }
                BaseSpace::Omega.expect(set.space()?)?;
                Ok(BaseSpace::TwoCopies)
            }
            Subsets { n, set } => {
                if *n == 0 {
                    return Err(Error::Malformed("[S]^0 is not supported".into()));
                }
                BaseSpace::Omega.expect(set.space()?)?;
                Ok(BaseSpace::NSubsets { n: *n })
            }
            Annotated { set, .. } => set.space(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let expr: SetExpr = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("set expression at line {} column {}: {e}", e.line(), e.column())))?;
        expr.space()?;
        Ok(expr)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("set expressions serialize")
    }
}

/// `BaseSpace` as a short string: `omega`, `omega-squared`, `two-copies`,
/// `subsets-<n>`, `omega-times-omega`.
pub mod space_name {
    use super::BaseSpace;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn to_name(space: &BaseSpace) -> String {
        match space {
            BaseSpace::Omega => "omega".into(),
            BaseSpace::OmegaSquared => "omega-squared".into(),
            BaseSpace::TwoCopies => "two-copies".into(),
            BaseSpace::NSubsets { n } => format!("subsets-{n}"),
            BaseSpace::OmegaTimesOmega => "omega-times-omega".into(),
        }
    }

    pub fn from_name(name: &str) -> Result<BaseSpace, String> {
        match name {
            "omega" => Ok(BaseSpace::Omega),
            "omega-squared" => Ok(BaseSpace::OmegaSquared),
            "two-copies" => Ok(BaseSpace::TwoCopies),
            "omega-times-omega" => Ok(BaseSpace::OmegaTimesOmega),
            other => other
                .strip_prefix("subsets-")
                .and_then(|n| n.parse().ok())
                .map(|n| BaseSpace::NSubsets { n })
                .ok_or_else(|| format!("unknown base space {other:?}")),
        }
    }

    pub fn serialize<S: Serializer>(space: &BaseSpace, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_name(space))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BaseSpace, D::Error> {
        let name = String::deserialize(d)?;
        from_name(&name).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_of_nested_tree() {
        let e = SetExpr::difference(
            SetExpr::union(vec![SetExpr::Squares, SetExpr::powers(2)]),
            SetExpr::block_rule(GridSchedule::Factorial, BlockRule::Last { count: CountFn::Const { value: 1 } }),
        );
        let text = e.to_json();
        assert_eq!(SetExpr::from_json(&text).unwrap(), e);
    }

    #[test]
    fn negative_step_is_malformed() {
        let e = SetExpr::from_json(r#"{"kind":"arithmetic","start":3,"step":-2}"#);
        assert!(matches!(e, Err(Error::Malformed(_))));
    }

    #[test]
    fn parse_errors_report_position() {
        let err = SetExpr::from_json("{\"kind\":\"squares\",,}").unwrap_err();
        assert!(err.to_string().contains("column"));
    }

    #[test]
    fn mixed_spaces_are_rejected() {
        let e = SetExpr::union(vec![SetExpr::LowerTriangle, SetExpr::Squares]);
        assert!(matches!(e.space(), Err(Error::SpaceMismatch { .. })));
    }
}
