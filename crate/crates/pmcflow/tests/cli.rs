use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pmcflow::presets::PRESETS;

fn pmcflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmcflow")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_FLOW: &str = r#"
name = "small"
kind = "flow"

[chart]
kind = "minkowski"
n = 1

[grid]
nodes = 41
r_max = 3.0

[initial]
kind = "hyperboloid"
tau0 = 1.0
bump = { amplitude = 0.05, width = 0.5 }

[field]
kind = "cmc"

[flow]
s_end = 0.2
record_every = 10

[diagnostics]
frame = "hyperboloid"
residuals = true

[checks]
completed = true
"#;

fn write_config(dir: &Path, src: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, src).unwrap();
    p.display().to_string()
}

#[test]
fn scenarios_lists_every_preset() {
    let o = pmcflow(&["scenarios"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for (name, _, _) in PRESETS {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn run_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FLOW);
    let out = dir.path().join("out");
    let o = pmcflow(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(out.join("small.series.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "s,sup_H_minus_h,sup_kappa,sup_A,sup_phi,u_min,u_max,q_min,r1,r6,r7,barrier_violations"
    );
    assert!(csv.lines().count() > 2);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("small.summary.json")).unwrap()).unwrap();
    for key in ["termination", "s_final", "sup_h_minus_h_final", "decay_rate", "checks"] {
        assert!(summary.get(key).is_some(), "{key} missing");
    }
    assert_eq!(summary["termination"], "completed");
    assert_eq!(summary["checks"]["completed"]["pass"], true);
    assert!((summary["s_final"].as_f64().unwrap() - 0.2).abs() < 1e-12);
}

#[test]
fn identical_runs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FLOW);
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        assert!(pmcflow(&["run", &cfg, "--out", out.to_str().unwrap()]).status.success());
        fs::read(out.join("small.series.csv")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn failing_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let src = SMALL_FLOW.replace("completed = true", "stationarity = { tol = 1e-12 }");
    let cfg = write_config(dir.path(), &src);
    let out = dir.path().join("out");
    let o = pmcflow(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("small.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["checks"]["stationarity"]["pass"], false);
    assert!(summary["checks"].get("completed").is_none());
}

#[test]
fn engine_error_is_reported_with_its_reason() {
    let dir = tempfile::tempdir().unwrap();
    let src = SMALL_FLOW.replace("kind = \"cmc\"", "kind = \"constant\"\nvalue = 40.0").replace("s_end = 0.2", "s_end = 2.0");
    let cfg = write_config(dir.path(), &src);
    let out = dir.path().join("out");
    let o = pmcflow(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("small.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["termination"], "SpacelikeViolation");
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_FLOW.replace("[grid]\n", "[grid]\nviscosity = 1.0\n"));
    let o = pmcflow(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("viscosity") && err.contains("line 10"), "{err}");
    assert_eq!(pmcflow(&["run", "no-such-preset"]).status.code(), Some(2));
}

#[test]
fn verify_filter_runs_only_matching_checks() {
    let o = Command::new(env!("CARGO_BIN_EXE_pmcflow"))
        .args(["verify", "--filter", "tilt"])
        .env("PMCFLOW_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    let report: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let names: Vec<&str> = report["entries"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["tilt-equivalence"]);
    assert_eq!(report["pass"], true);
}
