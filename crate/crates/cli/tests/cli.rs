//! Black-box tests of the `cgankd` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cgankd_cli::table::Table;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cgankd"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn minimal() -> PathBuf {
    configs().join("minimal.cfg")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cgankd")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn cells(t: &Table, kind: &str) -> Vec<Vec<String>> {
    let k = t.column("row_kind").unwrap();
    t.rows.iter().filter(|r| r[k] == kind).cloned().collect()
}

#[test]
fn missing_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "does/not/exist.cfg", "--out-dir", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn malformed_config_and_bad_flags_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "rho = 1.5\n").unwrap();
    assert_eq!(run(&["run", s(&cfg), "--out-dir", s(dir.path())]).status.code(), Some(2));
    assert_eq!(run(&["sweep", s(&minimal()), "--param", "nope", "--values", "1"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn run_writes_one_report_row_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["run", s(&minimal()), "--out-dir", s(dir.path())]);
    let t = Table::load(&dir.path().join("report.csv")).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.rows[0][t.column("task").unwrap()], "classification");
    assert_eq!(t.rows[0][t.column("seed").unwrap()], "3");
    for f in ["manifest.cfg", "config.resolved.cfg", "report.txt", "artifacts/teacher.net", "artifacts/fakes_m2.dataset"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn seed_override_and_manifest_rerun_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    ok(&["run", s(&minimal()), "--seed", "11", "--out-dir", s(a.path())]);
    ok(&["run", s(&minimal()), "--seed", "11", "--out-dir", s(b.path())]);
    let manifest = a.path().join("manifest.cfg");
    ok(&["run", "--manifest", s(&manifest), "--out-dir", s(c.path())]);
    let report = |d: &Path| fs::read(d.join("report.csv")).unwrap();
    assert_eq!(report(a.path()), report(b.path()));
    assert_eq!(report(a.path()), report(c.path()));
    assert_eq!(fs::read(a.path().join("report.txt")).unwrap(), fs::read(c.path().join("report.txt")).unwrap());
    let t = Table::load(&a.path().join("report.csv")).unwrap();
    assert_eq!(t.rows[0][t.column("seed").unwrap()], "11");
}

#[test]
fn rho_sweep_endpoints_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "sweep",
        s(&minimal()),
        "--param",
        "rho",
        "--values",
        "1,0,0.5",
        "--seeds",
        "0..1",
        "--jobs",
        "2",
        "--out-dir",
        s(dir.path()),
    ]);
    let t = Table::load(&dir.path().join("sweep.csv")).unwrap();
    let rows = cells(&t, "cell");
    assert_eq!(rows.len(), 6);
    assert_eq!(cells(&t, "mean").len(), 3);
    let (v, nokd, kd, mg) = (
        t.column("value").unwrap(),
        t.column("student_nokd_metric").unwrap(),
        t.column("student_cgankd_metric").unwrap(),
        t.column("m_g").unwrap(),
    );
    let values: Vec<f64> = rows.iter().map(|r| r[v].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    for r in rows.iter().filter(|r| r[v] == "0") {
        assert_eq!(r[nokd], r[kd]);
        assert_eq!(r[mg], "0");
    }
}

#[test]
fn mg_sweep_counts_follow_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sweep", s(&minimal()), "--param", "mg", "--values", "200,0,100", "--out-dir", s(dir.path())]);
    let t = Table::load(&dir.path().join("sweep.csv")).unwrap();
    let mg = t.column("m_g").unwrap();
    let rows = cells(&t, "cell");
    let got: Vec<&str> = rows.iter().map(|r| r[mg].as_str()).collect();
    assert_eq!(got, ["0", "100", "200"]);
}

#[test]
fn ablation_has_four_rows_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["ablation", s(&minimal()), "--seeds", "0,1,2", "--out-dir", s(dir.path())]);
    let t = Table::load(&dir.path().join("ablation.csv")).unwrap();
    let rows = cells(&t, "cell");
    assert_eq!(rows.len(), 12);
    let var = t.column("variant").unwrap();
    for name in ["raw", "m1", "m1_m2", "m1_m2_replace"] {
        assert_eq!(rows.iter().filter(|r| r[var] == name).count(), 3);
    }
    assert_eq!(cells(&t, "mean").len(), 4);
}

#[test]
fn verify_bound_reports_a_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let setup = configs().join("discrete_standard.cfg");
    ok(&["verify-bound", s(&setup), "--trials", "20", "--out-dir", s(dir.path())]);
    let t = Table::load(&dir.path().join("bound.csv")).unwrap();
    assert_eq!(cells(&t, "trial").len(), 20);
    let summary = cells(&t, "summary");
    let f: f64 = summary[0][t.column("holds_fraction").unwrap()].parse().unwrap();
    assert!((0.0..=1.0).contains(&f));
}

#[test]
fn plotdata_aggregates_sweep_cells() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["sweep", s(&minimal()), "--param", "rho", "--values", "0,0.9", "--seeds", "0,1", "--out-dir", s(dir.path())]);
    let sweep = dir.path().join("sweep.csv");
    let plot_dir = dir.path().join("plot");
    ok(&["plotdata", s(&sweep), "--kind", "sweep", "--out-dir", s(&plot_dir)]);
    let p = Table::load(&plot_dir.join("plot.csv")).unwrap();
    assert_eq!(p.header, ["x", "series", "mean", "stddev", "count"]);
    assert_eq!(p.rows.len(), 6);
    let t = Table::load(&sweep).unwrap();
    let means = cells(&t, "mean");
    let (v, kd) = (t.column("value").unwrap(), t.column("student_cgankd_metric").unwrap());
    for m in means {
        let row = p.rows.iter().find(|r| r[0] == m[v] && r[1] == "student_cgankd").unwrap();
        let a: f64 = row[2].parse().unwrap();
        let b: f64 = m[kd].parse().unwrap();
        assert!((a - b).abs() < 1e-12);
        assert_eq!(row[4], "2");
    }
}

#[test]
fn written_tables_read_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["ablation", s(&minimal()), "--out-dir", s(dir.path())]);
    let path = dir.path().join("ablation.csv");
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(Table::load(&path).unwrap().to_string().unwrap(), text);
}
