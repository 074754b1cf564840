use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn degenfd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degenfd")).args(args).output().unwrap()
}

fn scenario(name: &str) -> String {
    scenarios().join(name).to_string_lossy().into_owned()
}

/// Rows of a CSV file, each split on commas, header dropped.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn last_column(path: &Path) -> Vec<f64> {
    csv_rows(path)
        .iter()
        .map(|r| r.last().unwrap().parse().unwrap())
        .collect()
}

fn assert_close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= tol, "entry {i}: {g} vs {w}");
    }
}

#[test]
fn validate_reports_json_and_exit_status() {
    let out = degenfd(&["validate", &scenario("heat1d.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    // the default checks, on every lattice of the scenario
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 3 * 4);
    let names: Vec<&str> = reports
        .iter()
        .filter(|r| r["N"] == 64)
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["monotonicity", "c_floor", "q_drift"]);

    let out = degenfd(&["validate", &scenario("broken-monotone.json")]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["reports"][0]["witness"]["lambda"], "1");
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(degenfd(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));

    let text = fs::read_to_string(scenarios().join("heat1d.json")).unwrap();
    fs::write(&bad, text.replace("sin(x)", "sin(x")).unwrap();
    assert_eq!(degenfd(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));

    // probes without explicit direction weights are rejected
    fs::write(
        &bad,
        text.replace("\"snapshots\"", "\"checks\": [\"probe_first_order\"], \"snapshots\""),
    )
    .unwrap();
    assert_eq!(degenfd(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(degenfd(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        degenfd(&["validate", "/nonexistent/scenario.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn run_refuses_failing_scenarios_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = degenfd(&[
        "run",
        &scenario("broken-monotone.json"),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());

    let out = degenfd(&[
        "run",
        &scenario("broken-monotone.json"),
        "--out",
        out_dir.to_str().unwrap(),
        "--force",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("final.csv").exists());
    // the maximum principle is not claimed for a non-monotone scheme
    assert!(!out_dir.join("max_principle.json").exists());
}

#[test]
fn parabolic_run_writes_snapshots_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = degenfd(&["run", &scenario("heat1d.json"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["N"], 64);
    assert_eq!(meta["integrator"], "rk4");
    assert_eq!(meta["snapshot_times"].as_array().unwrap().len(), 3);
    for f in meta["snapshot_files"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists());
    }
    let mp: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("max_principle.json")).unwrap()).unwrap();
    assert_eq!(mp["pass"], true);
    // the first snapshot is the initial value
    let first = last_column(&dir.path().join("snapshot_000.csv"));
    let h = std::f64::consts::TAU / 64.0;
    let g: Vec<f64> = (0..64).map(|i| (i as f64 * h).sin()).collect();
    assert_close(&first, &g, 1e-15);
}

#[test]
fn elliptic_mode_rejects_time_dependent_forcing() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("s.json");
    let text = fs::read_to_string(scenarios().join("elliptic1d.json")).unwrap();
    fs::write(&src, text.replace("1.5*sin(x)", "t*sin(x)")).unwrap();
    let out = degenfd(&[
        "run",
        src.to_str().unwrap(),
        "--mode",
        "elliptic",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn derivative_study_writes_csv_and_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = degenfd(&[
        "study",
        &scenario("degenerate.json"),
        "--study",
        "derivatives",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("derivatives.csv")).unwrap();
    assert!(csv.starts_with("h,N,n,mixed_norms,proxy\n"));
    // four levels, n = 0..=3
    assert_eq!(csv.lines().count(), 1 + 16);
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("derivatives.json")).unwrap()).unwrap();
    assert!(v["ratios"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r.as_f64().unwrap() <= 1.2));
}

#[test]
fn acceleration_study_writes_one_table_per_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = degenfd(&[
        "study",
        &scenario("drift1d.json"),
        "--study",
        "acceleration",
        "--k",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for k in 0..=2 {
        let rows = csv_rows(&dir.path().join(format!("acceleration_k{k}.csv")));
        assert_eq!(rows.len(), 5 - k);
    }
}

#[test]
fn golden_heat_run() {
    let dir = tempfile::tempdir().unwrap();
    degenfd(&["run", &scenario("heat1d.json"), "--out", dir.path().to_str().unwrap()]);
    let got = last_column(&dir.path().join("final.csv"));
    let want = last_column(&golden("heat1d_final.csv"));
    assert_close(&got, &want, 1e-13);
    // semidiscrete closed form with c = 1: exp(t((cos h - 1)/h² - 1)) sin x
    let h = std::f64::consts::TAU / 64.0;
    let decay = ((h.cos() - 1.0) / (h * h) - 1.0).exp();
    let exact: Vec<f64> = (0..64).map(|i| decay * (i as f64 * h).sin()).collect();
    assert_close(&want, &exact, 1e-12);
}

#[test]
fn golden_elliptic_run() {
    let dir = tempfile::tempdir().unwrap();
    degenfd(&[
        "run",
        &scenario("elliptic1d.json"),
        "--mode",
        "elliptic",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let got = last_column(&dir.path().join("solution.csv"));
    let want = last_column(&golden("elliptic1d_solution.csv"));
    assert_close(&got, &want, 1e-13);
    let h = std::f64::consts::TAU / 64.0;
    let denom = 1.0 + (1.0 - h.cos()) / (h * h);
    let exact: Vec<f64> = (0..64).map(|i| 1.5 * (i as f64 * h).sin() / denom).collect();
    assert_close(&want, &exact, 1e-9);
}

#[test]
fn golden_drift_convergence() {
    let dir = tempfile::tempdir().unwrap();
    degenfd(&[
        "study",
        &scenario("drift1d.json"),
        "--study",
        "convergence",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let got = csv_rows(&dir.path().join("convergence.csv"));
    let want = csv_rows(&golden("drift1d_convergence.csv"));
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g[1], w[1]);
        let (ge, we): (f64, f64) = (g[2].parse().unwrap(), w[2].parse().unwrap());
        assert!((ge - we).abs() <= 1e-9 * we, "{ge} vs {we}");
    }
    // k = 1 extrapolation: second order
    let order: f64 = want.last().unwrap()[3].parse().unwrap();
    assert!((1.8..2.2).contains(&order));
}
