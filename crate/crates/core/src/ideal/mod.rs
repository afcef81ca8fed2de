//! Ideal descriptors and the three-valued membership oracle.

mod oracle;
mod verdict;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::WeightFn;
use crate::sets::expr::space_name;
use crate::sets::{BaseSpace, GridSchedule, SetExpr};

pub use oracle::{member, simplify_section};
pub use verdict::{replay, Certificate, Verdict, VerdictKind, Witness};

/// A member of the ideal catalog, or a combinator over descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IdealDescriptor {
    /// Finite sets of the given space.
    Fin {
        #[serde(default, with = "space_name")]
        space: BaseSpace,
    },
    /// `{A ⊆ {0,1}×ω : {n : (1, n) ∈ A} is finite}`.
    FinOplusFull,
    /// Sets in ω² with a uniform bound on column sizes `|A ∩ {k}×ω|`.
    EdFin,
    /// Sets of n-subsets containing no `[B]^n` with `B` infinite.
    Ramsey { n: u32 },
    /// Sets without arbitrarily long arithmetic progressions.
    VanDerWaerden,
    /// Sets containing no `FS(B)` with `B` infinite.
    Hindman,
    /// Sets for which some `n > 1` admits no `B` with `|B| = n` and `FS(B) ⊆ A`.
    Folkman,
    /// Sets in ω^n without arbitrarily large grids `v + α·{1..k}^n`.
    Gallai { n: u32 },
    /// Sets of natural density zero.
    #[serde(rename = "density")]
    DensityZero,
    /// `Σ_{n ∈ A} w(n) < ∞`.
    Summable { weight: WeightFn },
    /// `limsup_n A_w[0, n) / ω_w[0, n) = 0`.
    ErdosUlam { weight: WeightFn },
    /// `lim_n |A ∩ I_n| / |I_n| = 0`.
    FarahDensity { schedule: GridSchedule },
    /// `{A ∩ X : A ∈ I}`.
    Restriction { ideal: Box<IdealDescriptor>, carrier: SetExpr },
    /// `{A ⊆ {0,1}×ω : A_0 ∈ left, A_1 ∈ right}`.
    DirectSum { left: Box<IdealDescriptor>, right: Box<IdealDescriptor> },
    /// `{A ⊆ ω² : {x : A_x ∉ inner} ∈ outer}`.
    FubiniProduct { outer: Box<IdealDescriptor>, inner: Box<IdealDescriptor> },
    /// `{A ⊆ ω×ω : {i : A_i ∉ J_i} ∈ outer}`, with `J_i = inners[i]` or `default`.
    FubiniSum {
        outer: Box<IdealDescriptor>,
        #[serde(default)]
        inners: Vec<IdealDescriptor>,
        default: Box<IdealDescriptor>,
    },
}

impl IdealDescriptor {
    pub fn fin() -> Self {
        IdealDescriptor::Fin { space: BaseSpace::Omega }
    }

    /// Base space of the ideal; also checks that combinator arguments agree.
    pub fn space(&self) -> Result<BaseSpace> {
        use IdealDescriptor::*;
        let omega = |d: &IdealDescriptor, role: &str| -> Result<()> {
            let s = d.space()?;
            if s != BaseSpace::Omega {
                return Err(Error::SpaceMismatch { expected: format!("omega for the {role}"), found: s.to_string() });
            }
            Ok(())
        };
        Ok(match self {
            Fin { space } => *space,
            FinOplusFull => BaseSpace::TwoCopies,
            EdFin => BaseSpace::OmegaSquared,
            Ramsey { n } => {
                if *n == 0 {
                    return Err(Error::Malformed("Ramsey ideals need n >= 1".into()));
                }
                BaseSpace::NSubsets { n: *n }
            }
            VanDerWaerden | Hindman | Folkman | DensityZero => BaseSpace::Omega,
            Gallai { n } => match n {
                1 => BaseSpace::Omega,
                2 => BaseSpace::OmegaSquared,
                _ => return Err(Error::Malformed(format!("grid ideals are available for n = 1, 2; got {n}"))),
            },
            Summable { weight } | ErdosUlam { weight } => {
                weight.validate()?;
                let converges = weight.tail_closed_form(0).is_some()
                    || matches!(weight, WeightFn::ReciprocalPower { exp, .. } if *exp >= 2);
                if converges {
                    return Err(Error::DegenerateWeight("the total weight converges, so every set would be small".into()));
                }
                BaseSpace::Omega
            }
            FarahDensity { schedule } => {
                schedule.validate()?;
                BaseSpace::Omega
            }
            Restriction { ideal, carrier } => {
                let s = ideal.space()?;
                s.expect(carrier.space()?)?;
                s
            }
            DirectSum { left, right } => {
                omega(left, "left summand")?;
                omega(right, "right summand")?;
                BaseSpace::TwoCopies
            }
            FubiniProduct { outer, inner } => {
                omega(outer, "outer ideal")?;
                omega(inner, "inner ideal")?;
                BaseSpace::OmegaSquared
            }
            FubiniSum { outer, inners, default } => {
                omega(outer, "outer ideal")?;
                for i in inners {
                    omega(i, "summand")?;
                }
                omega(default, "default summand")?;
                BaseSpace::OmegaTimesOmega
            }
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: IdealDescriptor = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("ideal descriptor at line {} column {}: {e}", e.line(), e.column())))?;
        d.space()?;
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("descriptors serialize")
    }

    pub fn name(&self) -> String {
        use IdealDescriptor::*;
        match self {
            Fin { .. } => "Fin".into(),
            FinOplusFull => "Fin⊕P(ω)".into(),
            EdFin => "ED_fin".into(),
            Ramsey { n } => format!("R_{n}"),
            VanDerWaerden => "W".into(),
            Hindman => "H".into(),
            Folkman => "F".into(),
            Gallai { n } => format!("G_{n}"),
            DensityZero => "I_d".into(),
            Summable { .. } => "I_(w)".into(),
            ErdosUlam { .. } => "EU_w".into(),
            FarahDensity { .. } => "Z_φ".into(),
            Restriction { ideal, .. } => format!("{}|X", ideal.name()),
            DirectSum { left, right } => format!("{}⊕{}", left.name(), right.name()),
            FubiniProduct { outer, inner } => format!("{}⊗{}", outer.name(), inner.name()),
            FubiniSum { outer, .. } => format!("{}-ΣJ_i", outer.name()),
        }
    }
}

pub fn restrict(ideal: IdealDescriptor, carrier: SetExpr) -> Result<IdealDescriptor> {
    let d = IdealDescriptor::Restriction { ideal: Box::new(ideal), carrier };
    d.space()?;
    Ok(d)
}

pub fn direct_sum(left: IdealDescriptor, right: IdealDescriptor) -> Result<IdealDescriptor> {
    let d = IdealDescriptor::DirectSum { left: Box::new(left), right: Box::new(right) };
    d.space()?;
    Ok(d)
}

pub fn fubini_product(outer: IdealDescriptor, inner: IdealDescriptor) -> Result<IdealDescriptor> {
    let d = IdealDescriptor::FubiniProduct { outer: Box::new(outer), inner: Box::new(inner) };
    d.space()?;
    Ok(d)
}

pub fn fubini_sum(outer: IdealDescriptor, inners: Vec<IdealDescriptor>, default: IdealDescriptor) -> Result<IdealDescriptor> {
    let d = IdealDescriptor::FubiniSum { outer: Box::new(outer), inners, default: Box::new(default) };
    d.space()?;
    Ok(d)
}

/// Work limits for the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effort {
    /// Target witness size: AP length, grid side, rows inspected, and so on.
    pub budget: u64,
    /// Window used for density statistics and annotation checks.
    pub check_window: u64,
    /// Largest block enumerated element by element.
    pub enumeration_cap: u64,
    /// Partial sums above `divergence_factor` times the weight scale count as divergence evidence.
    pub divergence_factor: u64,
}

impl Default for Effort {
    fn default() -> Self {
        Effort { budget: 20, check_window: 1_000_000, enumeration_cap: crate::sets::ENUMERATION_CAP, divergence_factor: 1000 }
    }
}

impl Effort {
    pub fn with_budget(budget: u64) -> Self {
        Effort { budget, ..Effort::default() }
    }

    /// Effort for row sections inside product ideals.
    pub fn for_rows(&self) -> Self {
        Effort { check_window: self.check_window.min(1 << 14), ..*self }
    }
}
