use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use omega_ideals::ideal::IdealDescriptor;
use omega_ideals::sets::{InjectionExpr, SetExpr};

fn omega(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omega")).args(args).env_remove("OMEGA_EFFORT").output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad report ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).expect("schema present")).expect("schema parses")
}

/// Checks the parts of the schema the reports rely on: required and allowed
/// top-level keys, the command and status enums, and the common parameters.
fn validate(r: &Value) {
    let s = schema();
    let obj = r.as_object().expect("report is an object");
    let props = s["properties"].as_object().unwrap();
    for k in s["required"].as_array().unwrap() {
        assert!(obj.contains_key(k.as_str().unwrap()), "missing {k}");
    }
    for k in obj.keys() {
        assert!(props.contains_key(k), "unexpected key {k}");
    }
    for field in ["command", "status"] {
        assert!(props[field]["enum"].as_array().unwrap().contains(&r[field]), "{field} {} not in schema", r[field]);
    }
    assert!(r["summary"].is_string());
    let common = &r["parameters"]["common"];
    for k in props["parameters"]["properties"]["common"]["required"].as_array().unwrap() {
        assert!(common[k.as_str().unwrap()].is_u64(), "common.{k}");
    }
    if let Some(t) = obj.get("table") {
        let width = t["header"].as_array().unwrap().len();
        assert!(t["rows"].as_array().unwrap().iter().all(|row| row.as_array().unwrap().len() == width));
    }
}

#[test]
fn member_squares_density_zero() {
    let out = omega(&["member", "--ideal", r#"{"kind":"density"}"#, "--set", r#"{"kind":"squares"}"#, "--effort", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    validate(&r);
    assert_eq!(r["result"]["verdict"]["verdict"], "proven-in", "{r}");
    assert_eq!(r["parameters"]["common"]["effort"], 20);
}

#[test]
fn detect_ap_on_evens_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("evens.json");
    std::fs::write(&path, r#"{"kind":"arithmetic","start":0,"step":2}"#).unwrap();
    let out = omega(&["detect", "ap", "--set-file", path.to_str().unwrap(), "--window", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    validate(&r);
    assert_eq!(r["result"]["length"], 50);
}

#[test]
fn eu_nondense_depth_three() {
    let out = omega(&["witness", "eu-nondense", "--depth", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    validate(&r);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["table"]["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = omega(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn parse_errors_carry_positions() {
    let out = omega(&["member", "--ideal", "{\"kind\":\n  \"density\"", "--set", r#"{"kind":"squares"}"#]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    validate(&r);
    let summary = r["summary"].as_str().unwrap();
    assert!(summary.contains("line 2"), "{summary}");
}

#[test]
fn space_mismatch_is_input_error() {
    let out = omega(&["witness", "edfin", "--set", r#"{"kind":"squares"}"#]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["status"], "error");
}

#[test]
fn effort_exceeded_exits_three() {
    let out = omega(&["witness", "eu-nondense", "--depth", "40"]);
    assert_eq!(out.status.code(), Some(3));
    let r = report(&out);
    validate(&r);
    assert_eq!(r["status"], "effort-exceeded");
}

#[test]
fn non_convergence_is_refutation() {
    let seq = r#"{"pieces":[{"set":{"kind":"squares"},"value":{"kind":"const","value":"1"}}],"default":"0"}"#;
    let out = omega(&["converge", "--ideal", r#"{"kind":"fin"}"#, "--seq", seq]);
    assert_eq!(out.status.code(), Some(1));
    validate(&report(&out));
    let out = omega(&["converge", "--ideal", r#"{"kind":"density"}"#, "--seq", seq]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn idd_biinv_reports_square_density() {
    let out = omega(&["idd-biinv", "--map", r#"{"kind":"power","exp":2}"#]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    validate(&r);
    assert_eq!(r["result"]["density"], "1/1000");
    assert_eq!(r["result"]["bi_invariant"], false);
}

#[test]
fn effort_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_omega"))
        .args(["member", "--ideal", r#"{"kind":"fin"}"#, "--set", r#"{"kind":"explicit","elements":[1,2]}"#])
        .env("OMEGA_EFFORT", "7")
        .output()
        .unwrap();
    assert_eq!(report(&out)["parameters"]["common"]["effort"], 7);
}

#[test]
fn report_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = omega(&["witness", "antihomog", "--remove", "5,6", "--m", "2", "--depth", "6", "--report", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&path).unwrap(), out.stdout);
    validate(&report(&out));
}

#[test]
fn csv_and_human_formats() {
    let out = omega(&["density", "--set", r#"{"kind":"arithmetic","step":3}"#, "--window", "64", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,count,ratio"));
    assert_eq!(lines.last(), Some("64,22,11/32"));
    let out = omega(&["detect", "ap", "--set", r#"{"kind":"squares"}"#, "--format", "human"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("detect ap [answered]"));
}

#[test]
fn reports_validate_across_commands() {
    let runs: Vec<Vec<&str>> = vec![
        vec!["restrict", "--ideal", r#"{"kind":"density"}"#, "--carrier", r#"{"kind":"arithmetic","step":2}"#, "--set", r#"{"kind":"arithmetic","step":4}"#],
        vec!["detect", "grid", "--set", r#"{"kind":"lower-triangle"}"#, "--k", "3", "--window", "400"],
        vec!["detect", "fs", "--set", r#"{"kind":"arithmetic","step":2}"#, "--n", "3"],
        vec!["detect", "columns", "--set", r#"{"kind":"lower-triangle"}"#, "--window", "50"],
        vec!["eu-ratio", "--set", r#"{"kind":"squares"}"#, "--weight", r#"{"kind":"reciprocal"}"#, "--n", "1000"],
        vec!["farah", "--set", r#"{"kind":"arithmetic","step":2}"#, "--schedule", r#"{"kind":"factorial"}"#, "--blocks", "6"],
        vec!["abel-dini", "--x", r#"{"kind":"constant","value":"1"}"#, "--terms", "1000"],
        vec!["witness", "c1-extract", "--map", r#"{"kind":"swap-pairs"}"#, "--count", "5"],
        vec!["witness", "gallai2", "--set", r#"{"kind":"all","space":"omega-squared"}"#, "--depth", "6"],
        vec!["witness", "eu-dense", "--depth", "12"],
        vec!["c3", "--ideal", r#"{"kind":"density"}"#, "--family", r#"[{"kind":"squares"}]"#, "--window", "1000"],
        vec!["invariance", "--ideal", r#"{"kind":"fin"}"#, "--map", r#"{"kind":"shift","by":3}"#, "--family", r#"[{"kind":"explicit","elements":[1,2]},{"kind":"squares"}]"#],
        vec!["c5-refute", "--window", "65536"],
    ];
    for args in runs {
        let out = omega(&args);
        let r = report(&out);
        validate(&r);
        assert!(matches!(out.status.code(), Some(0 | 1 | 3)), "{args:?}: {r}");
    }
}

#[test]
fn grammar_examples_parse() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/grammar.md")).unwrap();
    let examples = text.split("## Examples").nth(1).unwrap();
    let mut parsed = 0;
    for line in examples.lines().filter(|l| l.starts_with('{')) {
        let ok = IdealDescriptor::from_json(line).is_ok()
            || SetExpr::from_json(line).is_ok()
            || serde_json::from_str::<InjectionExpr>(line).is_ok();
        assert!(ok, "{line}");
        parsed += 1;
    }
    assert_eq!(parsed, 5);
}
