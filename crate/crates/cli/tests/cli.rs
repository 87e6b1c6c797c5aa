use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pencil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pencil")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn builtin_run_writes_curves_audit_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = pencil(&["run", "--builtin", "pencil5x5", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["curves.csv", "audit.json", "summary.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let audit: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("audit.json")).unwrap()).unwrap();
    let checks = audit["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| c["passed"] == Value::Bool(true)));
}

#[test]
fn contract_name_is_accepted_in_configs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"builtin": "paper5x5"}, "grid": {"tMin": -1e4, "tMax": 1e4, "nPoints": 60}}"#,
    );
    let out = pencil(&["run", "--config", &cfg, "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn per_point_counts_match_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let out = pencil(&["run", "--builtin", "pencil5x5", "--out", path_str(dir.path()), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    for row in summary["counts"].as_array().unwrap().iter().filter(|r| r["computed"] == Value::Bool(true)) {
        let n = row["positives"].as_u64().unwrap() + row["negatives"].as_u64().unwrap() + row["infinity"].as_u64().unwrap();
        assert_eq!(n, 5, "{row}");
    }
}

#[test]
fn bad_input_exits_two_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"builtin": "pencil5x5"}, "grid": {"tMin": 5, "tMax": -5, "nPoints": 10}}"#,
    );
    let out_dir = dir.path().join("out");
    let out = pencil(&["run", "--config", &cfg, "--out", path_str(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.join("curves.csv").exists());

    let cfg = write_config(dir.path(), r#"{"problem": {"builtin": "pencil5x5"}, "bogus": true}"#);
    assert_eq!(pencil(&["run", "--config", &cfg]).status.code(), Some(2));

    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"pencil": {"A": [[1, 0], [0, 1]], "B": [[1, 0], [0, 1]], "C": [[1, 0], [0, 1]], "mode": "fixed"}}}"#,
    );
    assert_eq!(pencil(&["run", "--config", &cfg, "--out", path_str(&out_dir)]).status.code(), Some(2));
    assert_eq!(pencil(&["run", "--builtin", "nope"]).status.code(), Some(2));
    assert_eq!(pencil(&["run"]).status.code(), Some(2));
}

#[test]
fn negative_control_exits_one_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"builtin": "pencil5x5"}, "grid": {"tMin": -100, "tMax": 100, "nPoints": 80}, "audits": {"negativeControl": true}}"#,
    );
    let out = pencil(&["audit", "--config", &cfg, "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let audit: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("audit.json")).unwrap()).unwrap();
    let mono = audit["checks"].as_array().unwrap().iter().find(|c| c["name"] == "monotonicity").unwrap();
    assert_eq!(mono["passed"], Value::Bool(false));
    assert!(mono["witness"].is_object());
}

#[test]
fn inline_pencil_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"pencil": {"A": [[2, 0, 0], [0, 1, 0], [0, 0, 1]], "B": [[1, 0, 0], [0, -1, 0], [0, 0, 2]], "C": [[1, 0, 0], [0, 0, 0], [0, 0, 0]], "mode": "fixed"}},
            "grid": {"tMin": -1e4, "tMax": 1e4, "nPoints": 80}, "seed": 7}"#,
    );
    let out = pencil(&["run", "--config", &cfg, "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let st = summary["singularTimes"].as_array().unwrap();
    assert_eq!(st.len(), 1);
    assert!((st[0].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn fem1d_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"fem1d": {"kind": "neumann", "domain": [-1, 1], "nElems": 16, "interface": 0, "b": [1, 0], "c": [0, 1]}},
            "grid": {"tMin": -1000, "tMax": 1000, "nPoints": 80}}"#,
    );
    let out = pencil(&["run", "--config", &cfg, "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "moving");
    assert!(summary["threshold"].as_f64().unwrap() > 1.0);
}

#[test]
fn interval_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = pencil(&["reproduce", "fig2", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for t in ["1.5", "5", "100", "100000"] {
        let rows = csv_rows(&dir.path().join(format!("fig2_eigenfunction_t{t}.csv")));
        assert!(rows.len() >= 100);
        let max = rows.iter().map(|r| r[1].parse::<f64>().unwrap().abs()).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-9, "sup norm {max} at t = {t}");
    }
    let table = csv_rows(&dir.path().join("fig2_principal.csv"));
    let u0: Vec<f64> = table.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(u0.len(), 4);
    assert!(u0.windows(2).all(|w| w[0] > w[1]), "{u0:?}");
    assert!(u0.iter().all(|&u| u > 0.0));
}

#[test]
fn sweep_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = pencil(&["reproduce", "fig3", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig3_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reappearances"].as_array().unwrap().len(), 1);
    let counts = &summary["classification"]["counts"];
    assert_eq!(counts["drains_to_zero"], 2, "{counts}");
    assert!(dir.path().join("fig3_curves.csv").is_file());
}

#[test]
fn identical_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = pencil(&["run", "--builtin", "pencil5x5", "--seed", "11", "--out", path_str(d.path())]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["curves.csv", "audit.json", "summary.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn random_audit_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = pencil(&["audit", "--random", "5", "--seed", "3", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("random_audit.json").is_file());
}
