//! Command-line front end.
//!
//! Every run produces a [`Report`] with the full parameters, a status and
//! the typed result. Exit codes: 0 answered or passed, 1 refuted or
//! violation, 2 usage or input error, 3 effort exceeded or undecided.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::convergence::{
    c3_check, c5_family, c5_refuter_idd, ideal_limit, ideal_limit_schedule, idd_biinvariance, invariance_test,
    Classification, SequenceExpr, EPS_SCHEDULE,
};
use crate::detectors::{column_profile, find_fs_generator, find_grid_copy, find_grid_copy_1d, longest_ap, ramsey_block};
use crate::error::{Error, Result};
use crate::ideal::{member, replay, restrict, Effort, IdealDescriptor, Verdict, VerdictKind};
use crate::measures::{abel_dini, density_window, dyadic_checkpoints, eu_ratio, farah_block_measure, BlockValue, WeightFn};
use crate::num::{self, parse_rational, Rational};
use crate::sets::{BaseSpace, Coeff, GridSchedule, InjectionExpr, SetExpr};
use crate::witnesses::{
    antihomog_partition, antihomog_partition_fn, c1_builder, c1_pair_extraction, costar_witness, edfin_witness,
    eu_dense_counterexample, eu_nondense_counterexample, gallai2_witness, idd_enum_witness, product_witness,
    superset_closure, removal_refuter, window_detail, BlockMap, DenseCase, IsoWitness, WitnessReport,
};

#[derive(Debug, Parser)]
#[command(name = "omega", version, about = "Ideals on countable sets: membership, detectors, measures and witnesses")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Oracle budget (witness size, rows inspected).
    #[arg(long, global = true, env = "OMEGA_EFFORT", default_value_t = 20)]
    pub effort: u64,
    /// Window used by the oracle for statistics and annotation checks.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub check_window: u64,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    Human,
}

/// A JSON argument: inline text, or `@path` to read it from a file.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SetArg {
    /// Set expression (JSON, or @file).
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long, conflicts_with = "set")]
    pub set_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IdealArg {
    /// Ideal descriptor (JSON, or @file).
    #[arg(long)]
    pub ideal: Option<String>,
    #[arg(long, conflicts_with = "ideal")]
    pub ideal_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide membership of a set in an ideal.
    Member {
        #[command(flatten)]
        ideal: IdealArg,
        #[command(flatten)]
        set: SetArg,
    },
    /// Membership in the restriction of an ideal to a carrier set.
    Restrict {
        #[command(flatten)]
        ideal: IdealArg,
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        carrier: String,
    },
    /// Combinatorial witness search on a window.
    #[command(subcommand)]
    Detect(Detect),
    /// Window density with dyadic checkpoints.
    Density {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, default_value_t = 1 << 20)]
        window: u64,
    },
    /// Weighted ratio `A_w[0, n) / ω_w[0, n)`.
    EuRatio {
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        weight: String,
        #[arg(long)]
        n: u64,
    },
    /// Block measures `|A ∩ I_n| / |I_n|`.
    Farah {
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        schedule: String,
        #[arg(long, default_value_t = 8)]
        blocks: u64,
    },
    /// Partial sums of `Σ x_n / s_n^{1+δ}`.
    AbelDini {
        #[arg(long)]
        x: String,
        #[arg(long, default_value = "1")]
        delta: String,
        #[arg(long)]
        terms: u64,
    },
    /// Isomorphism and counterexample constructions.
    #[command(subcommand)]
    Witness(WitnessCmd),
    /// Ideal convergence of a piecewise-constant sequence.
    Converge {
        #[command(flatten)]
        ideal: IdealArg,
        #[arg(long)]
        seq: String,
        #[arg(long, default_value = "0")]
        x: String,
        /// Single ε; the schedule 1/k, k ≤ 64, is used when absent.
        #[arg(long)]
        eps: Option<String>,
    },
    /// Diagonal sequence for a family of small sets.
    C3 {
        #[command(flatten)]
        ideal: IdealArg,
        /// JSON array of set expressions.
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 10_000)]
        window: u64,
    },
    /// Invariance of an injection on a test family.
    Invariance {
        #[command(flatten)]
        ideal: IdealArg,
        #[arg(long)]
        map: String,
        #[arg(long)]
        family: String,
    },
    /// Linear-bound and image-density criteria for bi-invariance under density zero.
    IddBiinv {
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 1_000_000)]
        window: u64,
    },
    /// Positive-lower-density refuter for the density zero ideal.
    C5Refute {
        #[arg(long, default_value_t = 1 << 30)]
        window: u64,
        #[arg(long)]
        family: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Detect {
    /// Longest arithmetic progression.
    Ap {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, default_value_t = 1000)]
        window: u64,
    },
    /// Grid `v + α·{1..k}^n`.
    Grid {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, default_value_t = 1000)]
        window: u64,
        #[arg(long)]
        k: u64,
    },
    /// `n` generators with all finite sums in the set.
    Fs {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, default_value_t = 200)]
        window: u64,
        #[arg(long)]
        n: usize,
    },
    /// `m` points whose `n`-subsets all lie in the set.
    Ramsey {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, default_value_t = 1000)]
        window: u64,
        #[arg(long)]
        m: usize,
    },
    /// Column counts in ω².
    Columns {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, default_value_t = 1000)]
        window: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum WitnessCmd {
    /// `f : ω → A` with `X ∈ I ⇔ f[X] ∈ I`, from small `ω ∖ A` and small infinite `B ⊆ A`.
    Costar {
        #[command(flatten)]
        ideal: IdealArg,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = 10_000)]
        window: u64,
    },
    /// Extend a witness for `A` to a superset `B`.
    Superset {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Injection `ω → A`.
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 1 << 14)]
        window: u64,
    },
    /// Column-preserving bijection from `D` onto part of `A`.
    Edfin {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, default_value_t = 50)]
        depth: u64,
        #[arg(long, default_value_t = 1 << 22)]
        max_window: u64,
        /// Random test sets for the column transfer.
        #[arg(long, default_value_t = 100)]
        samples: u64,
    },
    /// `(i, j) ↦ (g(i), f_i(j))` from witnesses `g` and `f_i`.
    Product {
        /// Outer witness (JSON with source, target, map, contract).
        #[arg(long)]
        g: String,
        /// JSON array of row witnesses.
        #[arg(long, default_value = "[]")]
        rows: String,
        #[arg(long)]
        default_row: Option<String>,
        #[arg(long, default_value_t = 64)]
        row_limit: u64,
        #[arg(long, default_value_t = 1 << 12)]
        window: u64,
    },
    /// Separated grids for the two-dimensional grid ideal.
    Gallai2 {
        #[command(flatten)]
        set: SetArg,
        #[arg(long, default_value_t = 10)]
        depth: u64,
        #[arg(long, default_value_t = 1 << 12)]
        max_width: u64,
    },
    /// Increasing enumeration of a set of positive lower density.
    Enum {
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        lower: Option<String>,
        #[arg(long, default_value_t = 1 << 20)]
        window: u64,
    },
    /// Disjoint pairs `b_k = f(a_k)` from the moved points of `f`.
    C1Extract {
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1000)]
        window: u64,
    },
    /// Involution built from `f : A → B` on a large part of `A ∖ B`.
    C1Build {
        #[command(flatten)]
        ideal: IdealArg,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 4096)]
        window: u64,
    },
    /// `(2^n)!` blocks: the shift map against `EU_h`.
    EuNondense {
        #[arg(long, default_value_t = 6)]
        depth: u64,
    },
    /// The dense Erdős–Ulam construction on `[2^{k_n}, 2^{k_{n+1}})`.
    EuDense {
        #[arg(long, default_value_t = 40)]
        depth: u64,
        #[arg(long, default_value_t = 1)]
        case: u8,
        /// `b` for case 1.
        #[arg(long, default_value = "1")]
        b: String,
        /// Representing weight for case 2 (block value JSON).
        #[arg(long)]
        g: Option<String>,
        /// Thinning sequence `b_n` for case 2 (JSON).
        #[arg(long, default_value = r#"{"seq":"reciprocal"}"#)]
        bn: String,
    },
    /// Split of factorial blocks by where an injection sends them.
    Antihomog {
        #[arg(long)]
        map: Option<String>,
        #[arg(long, default_value_t = 7)]
        depth: u64,
        /// Number of seeded random block maps to test instead of `--map`.
        #[arg(long)]
        random: Option<u64>,
        /// Blocks with removed points (comma separated), for the refuter.
        #[arg(long, value_delimiter = ',')]
        remove: Vec<u64>,
        #[arg(long, default_value_t = 2)]
        m: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Answered,
    Pass,
    Refuted,
    Violation,
    Unknown,
    EffortExceeded,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Answered | Status::Pass => 0,
            Status::Refuted | Status::Violation => 1,
            Status::Error => 2,
            Status::Unknown | Status::EffortExceeded => 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub parameters: Value,
    pub status: Status,
    pub summary: String,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

struct Outcome {
    status: Status,
    summary: String,
    result: Value,
    table: Option<Table>,
}

impl Outcome {
    fn new(status: Status, summary: impl Into<String>, result: impl Serialize) -> Self {
        Outcome { status, summary: summary.into(), result: to_value(result), table: None }
    }
    fn with_table(mut self, t: Table) -> Self {
        self.table = Some(t);
        self
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn read_arg(text: &str) -> Result<String> {
    match text.strip_prefix('@') {
        Some(path) => read_file(Path::new(path)),
        None => Ok(text.to_string()),
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T> {
    let text = read_arg(text)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{what} at line {} column {}: {e}", e.line(), e.column())))
}

fn parse_set(text: &str) -> Result<SetExpr> {
    SetExpr::from_json(&read_arg(text)?)
}

impl SetArg {
    fn load(&self) -> Result<SetExpr> {
        match (&self.set, &self.set_file) {
            (Some(s), _) => parse_set(s),
            (None, Some(p)) => SetExpr::from_json(&read_file(p)?),
            (None, None) => Err(Error::Parse("a set is required (--set or --set-file)".into())),
        }
    }
}

impl IdealArg {
    fn load(&self) -> Result<IdealDescriptor> {
        match (&self.ideal, &self.ideal_file) {
            (Some(s), _) => IdealDescriptor::from_json(&read_arg(s)?),
            (None, Some(p)) => IdealDescriptor::from_json(&read_file(p)?),
            (None, None) => Err(Error::Parse("an ideal is required (--ideal or --ideal-file)".into())),
        }
    }
}

fn parse_family(text: &str) -> Result<Vec<SetExpr>> {
    let family: Vec<SetExpr> = parse_json("set family", text)?;
    for s in &family {
        s.space()?;
    }
    Ok(family)
}

fn parse_rat(text: &str) -> Result<Rational> {
    parse_rational(text)
}

fn verdict_status(v: &Verdict) -> Status {
    match v.kind() {
        VerdictKind::Unknown => Status::Unknown,
        _ => Status::Answered,
    }
}

fn witness_status(r: &WitnessReport) -> Status {
    if r.passed() {
        Status::Pass
    } else {
        Status::Refuted
    }
}

fn error_status(e: &Error) -> Status {
    match e {
        Error::EffortExceeded(_) => Status::EffortExceeded,
        Error::Injectivity { .. } | Error::NotIncreasing { .. } | Error::Annotation(_) | Error::Internal(_) => {
            Status::Violation
        }
        _ => Status::Error,
    }
}

impl Common {
    fn effort(&self) -> Effort {
        Effort { budget: self.effort, check_window: self.check_window, ..Effort::default() }
    }
}

fn window_elements(set: &SetExpr, window: u64) -> Result<Vec<u64>> {
    Ok(set.window(window)?.elements)
}

fn membership(ideal: &IdealDescriptor, set: &SetExpr, effort: &Effort) -> Result<Outcome> {
    let v = member(ideal, set, effort)?;
    let replayed = match v.witness() {
        Some(w) => Some(replay(ideal, set, w)?),
        None => None,
    };
    let status = verdict_status(&v);
    Ok(Outcome::new(status, format!("{}: {}", ideal.name(), v.summary()), json!({ "verdict": v, "replayed": replayed })))
}

fn detect(cmd: &Detect) -> Result<(Value, Outcome)> {
    Ok(match cmd {
        Detect::Ap { set, window } => {
            let s = set.load()?;
            BaseSpace::Omega.expect(s.space()?)?;
            let r = longest_ap(&window_elements(&s, *window)?);
            let summary = format!("longest progression below {window}: length {}", r.length);
            (json!({ "detector": "ap", "set": s, "window": window }), Outcome::new(Status::Answered, summary, r))
        }
        Detect::Grid { set, window, k } => {
            let s = set.load()?;
            let pts = window_elements(&s, *window)?;
            let found = match s.space()? {
                BaseSpace::Omega => find_grid_copy_1d(&pts, *k),
                BaseSpace::OmegaSquared => find_grid_copy(&pts, *k),
                other => return Err(Error::SpaceMismatch { expected: "omega or omega-squared".into(), found: other.to_string() }),
            };
            let status = if found.is_some() { Status::Answered } else { Status::Unknown };
            let summary = match &found {
                Some(g) => format!("grid of side {k} at {:?} with step {}", g.v, g.alpha),
                None => format!("no grid of side {k} in the window"),
            };
            (json!({ "detector": "grid", "set": s, "window": window, "k": k }), Outcome::new(status, summary, json!({ "grid": found })))
        }
        Detect::Fs { set, window, n } => {
            let s = set.load()?;
            BaseSpace::Omega.expect(s.space()?)?;
            let found = find_fs_generator(&window_elements(&s, *window)?, *window, *n);
            let status = if found.is_some() { Status::Answered } else { Status::Unknown };
            let summary = match &found {
                Some(g) => format!("generators {g:?}"),
                None => format!("no {n} generators with all finite sums below {window}"),
            };
            (json!({ "detector": "fs", "set": s, "window": window, "n": n }), Outcome::new(status, summary, json!({ "generators": found })))
        }
        Detect::Ramsey { set, window, m } => {
            let s = set.load()?;
            let BaseSpace::NSubsets { n } = s.space()? else {
                return Err(Error::SpaceMismatch { expected: "subsets-n".into(), found: s.space()?.to_string() });
            };
            let found = ramsey_block(&window_elements(&s, *window)?, n, *m)?;
            let status = if found.is_some() { Status::Answered } else { Status::Unknown };
            let summary = match &found {
                Some(b) => format!("homogeneous block {b:?}"),
                None => format!("no block of size {m} in the window"),
            };
            (json!({ "detector": "ramsey", "set": s, "window": window, "m": m }), Outcome::new(status, summary, json!({ "block": found })))
        }
        Detect::Columns { set, window } => {
            let s = set.load()?;
            BaseSpace::OmegaSquared.expect(s.space()?)?;
            let p = column_profile(&window_elements(&s, *window)?);
            let mut t = Table::new(&["column", "count"]);
            for (k, c) in &p.counts {
                t.push(vec![k.to_string(), c.to_string()]);
            }
            let summary = format!("largest column {:?} with {} points", p.argmax, p.max);
            (json!({ "detector": "columns", "set": s, "window": window }), Outcome::new(Status::Answered, summary, p).with_table(t))
        }
    })
}

fn iso_outcome(w: &IsoWitness, window: u64, name: &str) -> Result<Outcome> {
    let check = w.check_window(window, window.saturating_mul(4))?;
    let mut r = WitnessReport::new(name, json!({ "window": window }), window);
    r.check("bijective between the windows", check.ok(), window_detail(&check));
    let r = r.with_data(json!({ "witness": w, "check": check }));
    Ok(Outcome::new(witness_status(&r), format!("{name}: {}", window_detail(&check)), r))
}

fn report_outcome<T: Serialize>(r: &WitnessReport, full: T) -> Outcome {
    let failed = r.checks.iter().filter(|c| !c.passed).count();
    let summary = format!("{}: {} checks, {failed} failed", r.construction, r.checks.len());
    Outcome::new(witness_status(r), summary, json!({ "report": r, "construction": full }))
}

fn witness(cmd: &WitnessCmd, common: &Common) -> Result<(Value, Outcome)> {
    let effort = common.effort();
    Ok(match cmd {
        WitnessCmd::Costar { ideal, a, b, window } => {
            let (i, a, b) = (ideal.load()?, parse_set(a)?, parse_set(b)?);
            let w = costar_witness(&i, &a, &b, &effort)?;
            (json!({ "ideal": i, "a": a, "b": b, "window": window }), iso_outcome(&w, *window, "costar")?)
        }
        WitnessCmd::Superset { a, b, map, window } => {
            let (a, b) = (parse_set(a)?, parse_set(b)?);
            let f: InjectionExpr = parse_json("injection", map)?;
            let w = IsoWitness::new(SetExpr::all(), a.clone(), f.clone(), "X ∈ I ⇔ f[X] ∈ I");
            let c = superset_closure(&w, &b, *window)?;
            let r = c.report();
            (json!({ "a": a, "b": b, "map": f, "window": window }), report_outcome(&r, &c))
        }
        WitnessCmd::Edfin { set, depth, max_window, samples } => {
            let a = set.load()?;
            let w = edfin_witness(&a, *depth, *max_window)?;
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let target: Vec<u64> = w.points.iter().flatten().copied().collect();
            let mut failures = 0u64;
            for _ in 0..*samples {
                let x: Vec<u64> = target.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                failures += u64::from(!w.column_transfer(&x));
            }
            let mut r = w.report()?;
            r.check("column counts transfer on random subsets", failures == 0, format!("{failures} of {samples} failed"));
            (json!({ "set": a, "depth": depth, "max_window": max_window, "samples": samples, "seed": common.seed }), report_outcome(&r, &w))
        }
        WitnessCmd::Product { g, rows, default_row, row_limit, window } => {
            let g: IsoWitness = parse_json("outer witness", g)?;
            let rows: Vec<IsoWitness> = parse_json("row witnesses", rows)?;
            let default: Option<IsoWitness> = default_row.as_deref().map(|d| parse_json("default row witness", d)).transpose()?;
            let w = product_witness(&g, &rows, default.as_ref(), *row_limit)?;
            (json!({ "g": g, "rows": rows, "default_row": default, "window": window }), iso_outcome(&w, *window, "product")?)
        }
        WitnessCmd::Gallai2 { set, depth, max_width } => {
            let a = set.load()?;
            let w = gallai2_witness(&a, *depth, *max_width)?;
            let r = w.report(&a)?;
            (json!({ "set": a, "depth": depth, "max_width": max_width }), report_outcome(&r, &w))
        }
        WitnessCmd::Enum { set, lower, window } => {
            let a = set.load()?;
            let lower = lower.as_deref().map(parse_rat).transpose()?;
            let w = idd_enum_witness(&a, lower.clone(), *window)?;
            let r = w.report();
            (json!({ "set": a, "lower": lower.as_ref().map(num::fmt_rational), "window": window }), report_outcome(&r, &w))
        }
        WitnessCmd::C1Extract { map, count, window } => {
            let f: InjectionExpr = parse_json("injection", map)?;
            let p = c1_pair_extraction(&f, *count, *window)?;
            let r = p.report(*window);
            (json!({ "map": f, "count": count, "window": window }), report_outcome(&r, &p))
        }
        WitnessCmd::C1Build { ideal, a, b, map, window } => {
            let (i, a, b) = (ideal.load()?, parse_set(a)?, parse_set(b)?);
            let f: InjectionExpr = parse_json("injection", map)?;
            let c = c1_builder(&a, &b, &f, &i, &effort, *window)?;
            (json!({ "ideal": i, "a": a, "b": b, "map": f, "window": window }), report_outcome(&c.report, &c))
        }
        WitnessCmd::EuNondense { depth } => {
            let e = eu_nondense_counterexample(*depth)?;
            let mut t = Table::new(&["n", "ratio_a", "bound_a", "ratio_image", "bound_image"]);
            for b in &e.blocks {
                t.push(vec![
                    b.n.to_string(),
                    format!("{:e}", b.ratio_a_approx),
                    format!("{:e}", num::approx(&b.bound_a)),
                    format!("{}", b.ratio_image_approx),
                    format!("{}", num::approx(&b.bound_image)),
                ]);
            }
            (json!({ "depth": depth }), report_outcome(&e.report, &e).with_table(t))
        }
        WitnessCmd::EuDense { depth, case, b, g, bn } => {
            let c = match case {
                1 => DenseCase::One { b: parse_rat(b)? },
                2 => DenseCase::Two {
                    g: g.as_deref().map(|g| parse_json::<BlockValue>("block value", g)).transpose()?,
                    b: parse_json::<Coeff>("coefficient sequence", bn)?,
                },
                other => return Err(Error::Parse(format!("case must be 1 or 2, got {other}"))),
            };
            let e = eu_dense_counterexample(*depth, &c)?;
            let mut t = Table::new(&["n", "k", "density_ratio", "eq1_half", "eq1_reciprocal"]);
            for bl in &e.blocks {
                t.push(vec![
                    bl.n.to_string(),
                    bl.k.to_string(),
                    format!("{:e}", num::approx(&bl.density_ratio)),
                    format!("{}", num::approx(&bl.eq1_half)),
                    format!("{}", num::approx(&bl.eq1_reciprocal)),
                ]);
            }
            (json!({ "depth": depth, "case": c }), report_outcome(&e.report, &e).with_table(t))
        }
        WitnessCmd::Antihomog { map, depth, random, remove, m } => {
            let mut t = Table::new(&["n", "plus", "minus", "equal", "phi_minus", "phi_image_plus", "bound"]);
            let mut table = |stats: &crate::witnesses::AntihomogStats| {
                for b in &stats.blocks {
                    t.push(vec![
                        b.n.to_string(),
                        b.plus.to_string(),
                        b.minus.to_string(),
                        b.equal.to_string(),
                        num::fmt_rational(&b.phi_minus),
                        num::fmt_rational(&b.phi_image_plus),
                        num::fmt_rational(&b.bound),
                    ]);
                }
            };
            if let Some(k) = random {
                let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
                let mut maps = Vec::new();
                let mut failed = Vec::new();
                for i in 0..*k {
                    let bm = BlockMap::random(&mut rng, *depth);
                    let stats = antihomog_partition_fn(&|x| Ok(bm.apply(x)), *depth)?;
                    let strict = stats.blocks.iter().filter(|b| b.n >= 2).all(|b| b.strict_two_over_n);
                    if !strict || !stats.bounds_hold {
                        failed.push(i);
                    }
                    maps.push(json!({ "start_block": bm.start_block, "strict_below_two_over_n": strict }));
                }
                let mut r = WitnessReport::new("antihomog", json!({ "random": k, "depth": depth, "seed": common.seed }), *depth);
                r.check("φ_n(ω⁻), φ_n(f[ω⁺]) < 2/n for n ≥ 2 on every sampled map", failed.is_empty(), format!("failed maps {failed:?}"));
                let r = r.with_data(json!({ "maps": maps }));
                (json!({ "random": k, "depth": depth, "seed": common.seed }), report_outcome(&r, Value::Null))
            } else if !remove.is_empty() {
                let stats = removal_refuter(remove, *m, *depth)?;
                table(&stats);
                (json!({ "remove": remove, "m": m, "depth": depth }), report_outcome(&stats.report, &stats).with_table(t))
            } else {
                let f: InjectionExpr = match map {
                    Some(m) => parse_json("injection", m)?,
                    None => return Err(Error::Parse("give --map, --random or --remove".into())),
                };
                let stats = antihomog_partition(&f, *depth)?;
                table(&stats);
                (json!({ "map": f, "depth": depth }), report_outcome(&stats.report, &stats).with_table(t))
            }
        }
    })
}

fn dispatch(cli: &Cli) -> Result<(String, Value, Outcome)> {
    let common = &cli.common;
    let effort = common.effort();
    let (name, (params, outcome)) = match &cli.command {
        Command::Member { ideal, set } => {
            let (i, s) = (ideal.load()?, set.load()?);
            ("member", (json!({ "ideal": i, "set": s }), membership(&i, &s, &effort)?))
        }
        Command::Restrict { ideal, set, carrier } => {
            let (i, s, c) = (ideal.load()?, set.load()?, parse_set(carrier)?);
            let r = restrict(i.clone(), c.clone())?;
            ("restrict", (json!({ "ideal": i, "carrier": c, "set": s }), membership(&r, &s, &effort)?))
        }
        Command::Detect(d) => ("detect", detect(d)?),
        Command::Density { set, window } => {
            let s = set.load()?;
            let d = density_window(&s, *window)?;
            let mut t = Table::new(&["n", "count", "ratio"]);
            for c in &d.checkpoints {
                t.push(vec![c.n.to_string(), c.count.to_string(), num::fmt_rational(&c.ratio)]);
            }
            let summary = format!("{}/{} = {}", d.count, d.bound, num::approx(&d.ratio));
            ("density", (json!({ "set": s, "window": window }), Outcome::new(Status::Answered, summary, d).with_table(t)))
        }
        Command::EuRatio { set, weight, n } => {
            let s = set.load()?;
            let w: WeightFn = parse_json("weight", weight)?;
            let mut t = Table::new(&["n", "ratio"]);
            let mut last = None;
            for c in dyadic_checkpoints(*n) {
                let r = eu_ratio(&w, &s, c)?;
                t.push(vec![c.to_string(), num::fmt_rational(&r)]);
                last = Some(r);
            }
            let r = last.expect("at least one checkpoint");
            let summary = format!("ratio at {n}: {}", num::approx(&r));
            let result = json!({ "ratio": num::fmt_rational(&r), "approx": num::approx(&r) });
            ("eu-ratio", (json!({ "set": s, "weight": w, "n": n }), Outcome::new(Status::Answered, summary, result).with_table(t)))
        }
        Command::Farah { set, schedule, blocks } => {
            let s = set.load()?;
            let sch: GridSchedule = parse_json("schedule", schedule)?;
            let mut t = Table::new(&["n", "measure"]);
            let mut values = Vec::new();
            for n in 0..=*blocks {
                let v = farah_block_measure(&sch, &s, n)?;
                t.push(vec![n.to_string(), num::fmt_rational(&v)]);
                values.push(num::fmt_rational(&v));
            }
            let summary = format!("block measures for n ≤ {blocks}");
            ("farah", (json!({ "set": s, "schedule": sch, "blocks": blocks }), Outcome::new(Status::Answered, summary, values).with_table(t)))
        }
        Command::AbelDini { x, delta, terms } => {
            let w: WeightFn = parse_json("weight", x)?;
            let d = parse_rat(delta)?;
            let r = abel_dini(&w, &d, *terms)?;
            let mut t = Table::new(&["n", "lower", "upper"]);
            for p in &r.checkpoints {
                t.push(vec![p.n.to_string(), num::approx(&p.lower).to_string(), num::approx(&p.upper).to_string()]);
            }
            let summary = format!("partial sum in [{}, {}]", num::approx(&r.lower), num::approx(&r.upper));
            ("abel-dini", (json!({ "x": w, "delta": num::fmt_rational(&d), "terms": terms }), Outcome::new(Status::Answered, summary, r).with_table(t)))
        }
        Command::Witness(w) => ("witness", witness(w, common)?),
        Command::Converge { ideal, seq, x, eps } => {
            let i = ideal.load()?;
            let s: SequenceExpr = parse_json("sequence", seq)?;
            let x = parse_rat(x)?;
            let params = json!({ "ideal": i, "seq": s, "x": num::fmt_rational(&x), "eps": eps });
            match eps {
                Some(e) => {
                    let v = ideal_limit(&s, &x, &parse_rat(e)?, &i, &effort)?;
                    let st = verdict_status(&v);
                    ("converge", (params, Outcome::new(st, v.summary(), json!({ "verdict": v }))))
                }
                None => {
                    let r = ideal_limit_schedule(&s, &x, &i, &effort, EPS_SCHEDULE)?;
                    let mut t = Table::new(&["k", "verdict"]);
                    for p in &r.points {
                        t.push(vec![p.k.to_string(), p.verdict.kind().label().into()]);
                    }
                    let st = if r.converges {
                        Status::Answered
                    } else if r.points.iter().any(|p| p.verdict.kind() == VerdictKind::ProvenOut) {
                        Status::Refuted
                    } else {
                        Status::Unknown
                    };
                    let summary = format!("converges: {}, monotone: {}", r.converges, r.monotone);
                    ("converge", (params, Outcome::new(st, summary, r).with_table(t)))
                }
            }
        }
        Command::C3 { ideal, family, window } => {
            let i = ideal.load()?;
            let fam = parse_family(family)?;
            let r = c3_check(&fam, &i, &effort, *window)?;
            let st = if !r.inclusion_failures.is_empty() || !r.limit.monotone {
                Status::Violation
            } else if r.limit.converges {
                Status::Pass
            } else {
                Status::Unknown
            };
            let summary = format!("inclusion failures {:?}, converges {}", r.inclusion_failures, r.limit.converges);
            ("c3", (json!({ "ideal": i, "family": fam, "window": window }), Outcome::new(st, summary, r)))
        }
        Command::Invariance { ideal, map, family } => {
            let i = ideal.load()?;
            let f: InjectionExpr = parse_json("injection", map)?;
            let fam = parse_family(family)?;
            let r = invariance_test(&f, &i, &fam, &effort)?;
            let st = match r.classification {
                Classification::NotInvariant | Classification::NotBiInvariant => Status::Violation,
                Classification::Inconclusive => Status::Unknown,
                _ => Status::Answered,
            };
            let summary = format!("{:?}", r.classification);
            ("invariance", (json!({ "ideal": i, "map": f, "family": fam }), Outcome::new(st, summary, r)))
        }
        Command::IddBiinv { map, window } => {
            let f: InjectionExpr = parse_json("injection", map)?;
            let r = idd_biinvariance(&f, *window)?;
            let summary = format!("bi-invariant: {} (C = {}, image density {})", r.bi_invariant, r.c, num::fmt_rational(&r.density));
            ("idd-biinv", (json!({ "map": f, "window": window }), Outcome::new(Status::Answered, summary, r)))
        }
        Command::C5Refute { window, family } => {
            let fam = match family {
                Some(f) => parse_family(f)?,
                None => c5_family(),
            };
            let r = c5_refuter_idd(*window, &fam)?;
            let mut t = Table::new(&["checkpoint", "density_a"]);
            for (c, d) in &r.a_density {
                t.push(vec![c.to_string(), d.clone()]);
            }
            let out = report_outcome(&r.report, &r).with_table(t);
            ("c5-refute", (json!({ "window": window, "family": fam }), out))
        }
    };
    Ok((name.to_string(), params, outcome))
}

fn subcommand_name(cli: &Cli) -> String {
    match &cli.command {
        Command::Detect(d) => format!("detect {}", match d {
            Detect::Ap { .. } => "ap",
            Detect::Grid { .. } => "grid",
            Detect::Fs { .. } => "fs",
            Detect::Ramsey { .. } => "ramsey",
            Detect::Columns { .. } => "columns",
        }),
        Command::Witness(w) => format!("witness {}", match w {
            WitnessCmd::Costar { .. } => "costar",
            WitnessCmd::Superset { .. } => "superset",
            WitnessCmd::Edfin { .. } => "edfin",
            WitnessCmd::Product { .. } => "product",
            WitnessCmd::Gallai2 { .. } => "gallai2",
            WitnessCmd::Enum { .. } => "enum",
            WitnessCmd::C1Extract { .. } => "c1-extract",
            WitnessCmd::C1Build { .. } => "c1-build",
            WitnessCmd::EuNondense { .. } => "eu-nondense",
            WitnessCmd::EuDense { .. } => "eu-dense",
            WitnessCmd::Antihomog { .. } => "antihomog",
        }),
        Command::Member { .. } => "member".into(),
        Command::Restrict { .. } => "restrict".into(),
        Command::Density { .. } => "density".into(),
        Command::EuRatio { .. } => "eu-ratio".into(),
        Command::Farah { .. } => "farah".into(),
        Command::AbelDini { .. } => "abel-dini".into(),
        Command::Converge { .. } => "converge".into(),
        Command::C3 { .. } => "c3".into(),
        Command::Invariance { .. } => "invariance".into(),
        Command::IddBiinv { .. } => "idd-biinv".into(),
        Command::C5Refute { .. } => "c5-refute".into(),
    }
}

/// Runs a parsed command line and returns the report.
pub fn execute(cli: &Cli) -> Report {
    let command = subcommand_name(cli);
    let common = json!({ "effort": cli.common.effort, "check_window": cli.common.check_window, "seed": cli.common.seed });
    match dispatch(cli) {
        Ok((_, params, o)) => Report {
            command,
            parameters: json!({ "common": common, "command": params }),
            status: o.status,
            summary: o.summary,
            result: o.result,
            table: o.table,
        },
        Err(e) => Report {
            command,
            parameters: json!({ "common": common }),
            status: error_status(&e),
            summary: e.to_string(),
            result: json!({ "error": e.to_string() }),
            table: None,
        },
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders a report in the requested format.
pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("reports serialize") + "\n",
        Format::Human => format!("{} [{}]: {}\n", report.command, to_value(report.status).as_str().unwrap_or(""), report.summary),
        Format::Csv => {
            let mut out = String::new();
            match &report.table {
                Some(t) => {
                    out += &t.header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",");
                    out.push('\n');
                    for r in &t.rows {
                        out += &r.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",");
                        out.push('\n');
                    }
                }
                None => {
                    out += "field,value\n";
                    out += &format!("status,{}\n", to_value(report.status).as_str().unwrap_or(""));
                    out += &format!("summary,{}\n", csv_field(&report.summary));
                    if let Value::Object(m) = &report.result {
                        for (k, v) in m {
                            let text = match v {
                                Value::String(s) => s.clone(),
                                other => other.to_string(),
                            };
                            out += &format!("{},{}\n", csv_field(k), csv_field(&text));
                        }
                    }
                }
            }
            out
        }
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| Error::Parse(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Entry point: parses `args`, prints the report and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::Error.exit_code() } else { 0 };
        }
    };
    let report = execute(&cli);
    print!("{}", render(&report, cli.common.format));
    if let Some(path) = &cli.common.report {
        if let Err(e) = write_atomic(path, &render(&report, Format::Json)) {
            eprintln!("{e}");
            return Status::Error.exit_code();
        }
    }
    report.status.exit_code()
}
