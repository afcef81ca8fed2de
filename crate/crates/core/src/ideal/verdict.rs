use serde::{Deserialize, Serialize};

use super::oracle::{farah_limit, intersect, simplify_section};
use super::IdealDescriptor;
use crate::detectors::{fs_contained, ApWitness, GridWitness};
use crate::error::Result;
use crate::measures::{relative_density, sum_range};
use crate::num::{self, Rational};
use crate::sets::analysis::{known_density, known_infinite, AnnotationCheck};
use crate::sets::{unpair, BaseSpace, Point, SetExpr};

/// Answer of the membership oracle.
///
/// `Proven*` answers carry a certificate or witness; `Evidence*` answers
/// record how much of the set was inspected (`strength`), which never
/// decreases as the effort grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    ProvenIn {
        certificate: Certificate,
        effort: u64,
    },
    ProvenOut {
        witness: Witness,
        effort: u64,
    },
    EvidenceIn {
        strength: u64,
        detail: String,
        effort: u64,
    },
    EvidenceOut {
        strength: u64,
        detail: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        witness: Option<Witness>,
        effort: u64,
    },
    Unknown {
        detail: String,
        effort: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    ProvenIn,
    ProvenOut,
    EvidenceIn,
    EvidenceOut,
    Unknown,
}

impl VerdictKind {
    pub fn label(self) -> &'static str {
        match self {
            VerdictKind::ProvenIn => "proven-in",
            VerdictKind::ProvenOut => "proven-out",
            VerdictKind::EvidenceIn => "evidence-in",
            VerdictKind::EvidenceOut => "evidence-out",
            VerdictKind::Unknown => "unknown",
        }
    }
}

impl Verdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::ProvenIn { .. } => VerdictKind::ProvenIn,
            Verdict::ProvenOut { .. } => VerdictKind::ProvenOut,
            Verdict::EvidenceIn { .. } => VerdictKind::EvidenceIn,
            Verdict::EvidenceOut { .. } => VerdictKind::EvidenceOut,
            Verdict::Unknown { .. } => VerdictKind::Unknown,
        }
    }

    pub fn is_in(&self) -> bool {
        matches!(self, Verdict::ProvenIn { .. } | Verdict::EvidenceIn { .. })
    }

    pub fn is_out(&self) -> bool {
        matches!(self, Verdict::ProvenOut { .. } | Verdict::EvidenceOut { .. })
    }

    pub fn is_proven(&self) -> bool {
        matches!(self, Verdict::ProvenIn { .. } | Verdict::ProvenOut { .. })
    }

    pub fn effort(&self) -> u64 {
        match self {
            Verdict::ProvenIn { effort, .. }
            | Verdict::ProvenOut { effort, .. }
            | Verdict::EvidenceIn { effort, .. }
            | Verdict::EvidenceOut { effort, .. }
            | Verdict::Unknown { effort, .. } => *effort,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::ProvenOut { witness, .. } => Some(witness),
            Verdict::EvidenceOut { witness, .. } => witness.as_ref(),
            _ => None,
        }
    }

    pub fn strength(&self) -> Option<u64> {
        match self {
            Verdict::EvidenceIn { strength, .. } | Verdict::EvidenceOut { strength, .. } => Some(*strength),
            _ => None,
        }
    }

    pub fn summary(&self) -> String {
        match self {
            Verdict::ProvenIn { certificate, .. } => format!("proven-in: {}", certificate.describe()),
            Verdict::ProvenOut { witness, .. } => format!("proven-out: {}", witness.describe()),
            Verdict::EvidenceIn { detail, .. } => format!("evidence-in: {detail}"),
            Verdict::EvidenceOut { detail, .. } => format!("evidence-out: {detail}"),
            Verdict::Unknown { detail, .. } => format!("unknown: {detail}"),
        }
    }
}

/// Why a set belongs to an ideal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    /// Every element lies below `bound`.
    Finite { bound: u64 },
    /// A bound or identity that follows from how the set is built.
    Structural { reason: String },
    /// An analytic annotation that passed its window cross-check.
    Annotation { check: AnnotationCheck, reason: String },
    /// Membership obtained from the parts by a closure rule.
    Composite { rule: String, parts: Vec<Certificate> },
}

impl Certificate {
    pub fn structural(reason: impl Into<String>) -> Self {
        Certificate::Structural { reason: reason.into() }
    }

    pub fn describe(&self) -> String {
        match self {
            Certificate::Finite { bound } => format!("finite, every element below {bound}"),
            Certificate::Structural { reason } => reason.clone(),
            Certificate::Annotation { check, reason } => {
                format!("{reason}; window ratio {} at {}", num::fmt_rational(&check.final_ratio), check.window)
            }
            Certificate::Composite { rule, parts } => {
                let inner: Vec<String> = parts.iter().map(Certificate::describe).collect();
                format!("{rule} [{}]", inner.join("; "))
            }
        }
    }
}

/// Why a set is positive for an ideal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// Infinite by construction; `elements` are the ones found below `bound`.
    Infinite { reason: String, bound: u64, elements: Vec<u64> },
    Ap { ap: ApWitness },
    FiniteSums { generators: Vec<u64> },
    Grid { grid: GridWitness },
    RamseyBlock { n: u32, block: Vec<u64> },
    /// Encoded points of one column `{k} × ω`.
    Column { column: u64, points: Vec<u64> },
    PositiveDensity {
        #[serde(with = "num::serde_rational")]
        value: Rational,
        reason: String,
    },
    /// `lim φ_n(A) = value > 0` by construction.
    BlockMeasure {
        #[serde(with = "num::serde_rational")]
        value: Rational,
        reason: String,
    },
    /// Partial sum on `[0, bound)` at least `partial_sum_lower`.
    Divergence {
        bound: u64,
        #[serde(with = "num::serde_rational")]
        partial_sum_lower: Rational,
        detail: String,
    },
    RelativeDensity {
        bound: u64,
        #[serde(with = "num::serde_rational")]
        value: Rational,
    },
    /// Witness for the section at `part` (a copy of a direct sum).
    Section { part: u64, inner: Box<Witness> },
    /// Rectangle `rows × cols`: `cols` is positive for the inner ideal and
    /// `rows` for the outer one.
    Rows { row_witness: Box<Witness>, outer: Box<Witness> },
    /// Witness for one operand of a union.
    Part { index: usize, inner: Box<Witness> },
    /// Witness for `A ∩ X` in the unrestricted ideal.
    Restricted { inner: Box<Witness> },
}

impl Witness {
    pub fn describe(&self) -> String {
        match self {
            Witness::Infinite { reason, bound, elements } => {
                format!("infinite ({reason}); {} elements below {bound}", elements.len())
            }
            Witness::Ap { ap } => format!("arithmetic progression start {} step {} length {}", ap.start, ap.step, ap.length),
            Witness::FiniteSums { generators } => format!("FS({generators:?}) inside the set"),
            Witness::Grid { grid } => format!("grid v={:?} alpha={} side {}", grid.v, grid.alpha, grid.k),
            Witness::RamseyBlock { n, block } => format!("[{block:?}]^{n} inside the set"),
            Witness::Column { column, points } => format!("column {column} holds {} elements", points.len()),
            Witness::PositiveDensity { value, reason } => format!("density {} ({reason})", num::fmt_rational(value)),
            Witness::BlockMeasure { value, reason } => format!("block measures tend to {} ({reason})", num::fmt_rational(value)),
            Witness::Divergence { bound, partial_sum_lower, detail } => {
                format!("partial sum below {bound} is at least {} ({detail})", num::fmt_rational(partial_sum_lower))
            }
            Witness::RelativeDensity { bound, value } => {
                format!("relative density {} at window {bound}", num::fmt_rational(value))
            }
            Witness::Section { part, inner } => format!("copy {part}: {}", inner.describe()),
            Witness::Rows { row_witness, outer } => {
                format!("every listed row is positive ({}); row set positive ({})", row_witness.describe(), outer.describe())
            }
            Witness::Part { index, inner } => format!("operand {index}: {}", inner.describe()),
            Witness::Restricted { inner } => format!("inside the carrier: {}", inner.describe()),
        }
    }
}

fn all_in(set: &SetExpr, points: &[u64]) -> Result<bool> {
    let f = set.member_fn(points.iter().copied().max().unwrap_or(0) + 1);
    for &p in points {
        if !f(p)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Re-checks a witness against the set it was produced for.
pub fn replay(ideal: &IdealDescriptor, set: &SetExpr, witness: &Witness) -> Result<bool> {
    use IdealDescriptor as D;
    Ok(match witness {
        Witness::Infinite { elements, .. } => known_infinite(set) && all_in(set, elements)?,
        Witness::Ap { ap } => ap.length > 0 && ap.check(set)?,
        Witness::FiniteSums { generators } => !generators.is_empty() && fs_contained(generators, set)?.contained,
        Witness::Grid { grid } => grid.check(set)?,
        Witness::RamseyBlock { n, block } => {
            let space = BaseSpace::NSubsets { n: *n };
            let mut codes = Vec::new();
            let k = *n as usize;
            if block.len() >= k {
                let mut idx: Vec<usize> = (0..k).collect();
                'outer: loop {
                    codes.push(space.encode(&Point::Subset(idx.iter().map(|&i| block[i]).collect()))?);
                    let mut i = k;
                    while i > 0 {
                        i -= 1;
                        if idx[i] < block.len() - k + i {
                            idx[i] += 1;
                            for j in i + 1..k {
                                idx[j] = idx[j - 1] + 1;
                            }
                            continue 'outer;
                        }
                    }
                    break;
                }
            }
            all_in(set, &codes)?
        }
        Witness::Column { column, points } => points.iter().all(|&z| unpair(z).0 == *column) && all_in(set, points)?,
        Witness::PositiveDensity { value, .. } => {
            known_density(set).is_some_and(|d| &d.value == value) && value > &Rational::from_integer(0.into())
        }
        Witness::BlockMeasure { value, .. } => match ideal {
            D::FarahDensity { schedule } => farah_limit(set, schedule).as_ref() == Some(value),
            _ => false,
        },
        Witness::Divergence { bound, partial_sum_lower, .. } => match ideal {
            D::Summable { weight } => &sum_range(weight, set, 0, *bound)?.lower >= partial_sum_lower,
            _ => false,
        },
        Witness::RelativeDensity { bound, value } => match ideal {
            D::Restriction { carrier, .. } => relative_density(set, carrier, *bound)?.as_ref() == Some(value),
            _ => false,
        },
        Witness::Section { part, inner } => match ideal {
            D::DirectSum { left, right } => {
                let sub = if *part == 0 { left } else { right };
                replay(sub, &simplify_section(*part, set), inner)?
            }
            D::FinOplusFull => *part == 1 && replay(&D::fin(), &simplify_section(1, set), inner)?,
            _ => false,
        },
        Witness::Rows { row_witness, outer } => {
            let SetExpr::Rectangle { rows, cols } = set else { return Ok(false) };
            match ideal {
                D::FubiniProduct { outer: o, inner } => replay(o, rows, outer)? && replay(inner, cols, row_witness)?,
                D::FubiniSum { outer: o, inners, default } if inners.is_empty() => {
                    replay(o, rows, outer)? && replay(default, cols, row_witness)?
                }
                _ => false,
            }
        }
        Witness::Part { index, inner } => match set {
            SetExpr::Union { of } => match of.get(*index) {
                Some(part) => replay(ideal, part, inner)?,
                None => false,
            },
            _ => false,
        },
        Witness::Restricted { inner } => match ideal {
            D::Restriction { ideal: i, carrier } => replay(i, &intersect(set, carrier), inner)?,
            _ => false,
        },
    })
}
