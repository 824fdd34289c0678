use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_pathcalc"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

/// Parses a table, dropping the manifest line.
fn table(dir: &Path, name: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(dir.join("out").join(name)).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn column(dir: &Path, name: &str, col: &str) -> Vec<f64> {
    let (header, rows) = table(dir, name);
    let k = header.iter().position(|h| h == col).unwrap();
    rows.iter().map(|r| r[k]).collect()
}

const ITO_STEP: &str = r#"{
  "grid": {"level": 8},
  "partition": {"levels": [1, 6]},
  "x": {"kind": "step", "c": 2.0, "t0": 0.5},
  "function": {"name": "polynomial", "coeffs": [0.0, 0.0, 1.0]},
  "max_residual": 1e-12
}"#;

const QV_BROWNIAN: &str = r#"{
  "grid": {"level": 12},
  "partition": {"levels": [2, 10]},
  "path": {"kind": "dyadic-brownian", "seed": 7}
}"#;

#[test]
fn ito_step_square_is_exact() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["ito-check"], ITO_STEP);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let res = column(dir.path(), "ito.csv", "residual");
    assert_eq!(res.len(), 6);
    assert!(res.iter().all(|r| r.abs() <= 1e-12), "{res:?}");
}

#[test]
fn constant_path_has_zero_qv() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{
      "grid": {"level": 8},
      "partition": {"levels": [1, 8]},
      "path": {"kind": "formula", "formula": {"name": "constant", "value": 3.0}}
    }"#;
    let out = run(dir.path(), &["qv"], cfg);
    assert_eq!(out.status.code(), Some(0));
    let qv = column(dir.path(), "qv.csv", "qv");
    assert_eq!(qv.len(), 8);
    assert!(qv.iter().all(|&v| v == 0.0));
}

#[test]
fn linear_equation_with_time_gives_e() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{
      "grid": {"level": 16},
      "partition": {"levels": [4, 16]},
      "x": {"kind": "formula", "formula": {"name": "linear", "slope": 1.0}},
      "forcing": {"kind": "raw", "path": {"kind": "formula", "formula": {"name": "constant", "value": 1.0}}},
      "expect": {"value": 2.718281828459045, "tol": 1e-6}
    }"#;
    let out = run(dir.path(), &["linear"], cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let z = column(dir.path(), "linear.csv", "z");
    assert!((z.last().unwrap() - std::f64::consts::E).abs() <= 1e-6);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = ITO_STEP.replace("\"max_residual\"", "\"max_resdiual\"");
    let out = run(dir.path(), &["ito-check"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_resdiual"));
}

#[test]
fn negative_tolerance_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = ITO_STEP.replace("1e-12", "-1e-12");
    assert_eq!(run(dir.path(), &["ito-check"], &cfg).status.code(), Some(2));
}

#[test]
fn bad_level_range_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        run(dir.path(), &["qv", "--levels", "5..2"], QV_BROWNIAN).status.code(),
        Some(2)
    );
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["qv", "--seed", "42", "--levels", "3..9"];
    run(a.path(), &args, QV_BROWNIAN);
    run(b.path(), &args, QV_BROWNIAN);
    for name in ["qv.csv", "qv_path.csv", "report.json"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn seed_override_changes_the_path() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    run(a.path(), &["qv", "--seed", "1"], QV_BROWNIAN);
    run(b.path(), &["qv", "--seed", "2"], QV_BROWNIAN);
    assert_ne!(
        column(a.path(), "qv.csv", "qv").last(),
        column(b.path(), "qv.csv", "qv").last()
    );
}

#[test]
fn tables_end_with_a_manifest() {
    let dir = TempDir::new().unwrap();
    run(dir.path(), &["qv", "--levels", "3..7"], QV_BROWNIAN);
    let text = fs::read_to_string(dir.path().join("out/qv.csv")).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("# manifest: config_sha256="), "{last}");
    assert!(last.contains("command=qv partition=dyadic levels=3..7"), "{last}");
    let hash = last.split("config_sha256=").nth(1).unwrap().split(' ').next().unwrap();
    assert_eq!(hash.len(), 64);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["config_sha256"], hash);
}

#[test]
fn strict_turns_inconclusive_into_failure() {
    let dir = TempDir::new().unwrap();
    // A tolerance no sampled path can meet keeps the trend test inconclusive.
    let cfg = QV_BROWNIAN.replace("\"seed\": 7}", "\"seed\": 7}, \"trend\": {\"tol\": 0.0}");
    let relaxed = run(dir.path(), &["qv"], &cfg);
    assert_eq!(relaxed.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&relaxed.stdout).contains("INCONCLUSIVE"));
    assert!(!dir.path().join("out/failures.json").exists());
    let strict = run(dir.path(), &["qv", "--strict"], &cfg);
    assert_eq!(strict.status.code(), Some(1));
    assert!(dir.path().join("out/failures.json").exists());
}

#[test]
fn plots_only_on_request() {
    let dir = TempDir::new().unwrap();
    run(dir.path(), &["ito-check"], ITO_STEP);
    assert!(!dir.path().join("out/ito.svg").exists());
    run(dir.path(), &["qv", "--plot"], QV_BROWNIAN);
    assert!(dir.path().join("out/qv.svg").exists());
}

#[test]
fn positivity_breach_is_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{
      "grid": {"level": 8},
      "partition": {"levels": [1, 8]},
      "x": {"kind": "formula", "formula": {"name": "linear", "x0": 1.0, "slope": -2.0}},
      "floor": {"kind": "zero"}
    }"#;
    let out = run(dir.path(), &["drawdown"], cfg);
    assert_ne!(out.status.code(), Some(0));
}
