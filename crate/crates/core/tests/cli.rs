use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use precistab::cli::EstimateOutput;
use precistab::lab::report;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_precistab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn estimate_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "1,0\n-1,0\n");
    let v = json(&run(&["estimate", f.to_str().unwrap()]));
    assert_eq!(v["precistab_schema"], 1);
    assert_eq!(v["covariance"]["rows"], serde_json::json!([[1.0, 0.0], [0.0, 0.0]]));
    assert_eq!(v["eigenvalues"], serde_json::json!([1.0, 0.0]));
    assert_eq!(v["spectral_gap"], 1.0);
}

#[test]
fn estimate_single_row_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "3,4,5\n");
    let v = json(&run(&["estimate", f.to_str().unwrap()]));
    assert_eq!(v["covariance"]["rows"], serde_json::json!([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]));
}

#[test]
fn malformed_cell_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "1,2\n3,abc\n");
    let out = run(&["estimate", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let e = stderr(&out);
    assert!(e.contains("line 2") && e.contains("column 2"), "{e}");
    assert!(out.stdout.is_empty());
}

#[test]
fn ragged_rows_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "1,2\n3\n");
    assert_eq!(run(&["estimate", f.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn empty_input_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "# only a comment\n");
    assert_eq!(run(&["estimate", f.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn comments_and_crlf_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "# x,y\r\n1,0\r\n-1,0\r\n");
    let v = json(&run(&["estimate", f.to_str().unwrap()]));
    assert_eq!(v["samples"], 2);
}

#[test]
fn covariance_json_round_trips_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "0.1,0.7,-1.3\n2.2,0.3,0.9\n-0.4,1e-3,5\n1.7,-2.25,0.125\n");
    let out = run(&["estimate", f.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed: EstimateOutput = serde_json::from_str(&text).unwrap_or_else(|_| {
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("precistab_schema");
        serde_json::from_value(v).unwrap()
    });
    assert_eq!(report::to_json(&parsed) + "\n", text);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "1,0\n-1,0\n");
    let o = dir.path().join("cov.json");
    let out = run(&["--out", o.to_str().unwrap(), "estimate", f.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(o).unwrap()).unwrap();
    assert_eq!(v["samples"], 2);
}

#[test]
fn csv_format_prints_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "1,0\n-1,0\n");
    let out = run(&["--format", "csv", "estimate", f.to_str().unwrap()]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1,0\n0,0\n");
}

/// Rows whose centered covariance is diag(1, 2).
const DIAG_DATA: &str = "1.4142135623730951,0\n-1.4142135623730951,0\n0,2\n0,-2\n";

#[test]
fn precision_diagonal_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", DIAG_DATA);
    let v = json(&run(&["precision", f.to_str().unwrap(), "--lambda", "0.5"]));
    let rows = &v["s_star"]["rows"];
    assert!((rows[0][0].as_f64().unwrap() - 1.0 / 1.5).abs() < 1e-6);
    assert!((rows[1][1].as_f64().unwrap() - 1.0 / 2.5).abs() < 1e-6);
    assert!(rows[0][1].as_f64().unwrap().abs() < 1e-8);
    assert_eq!(v["converged"], true);
    assert_eq!(v["edges"], serde_json::json!([]));
    assert!(v["kkt_residual"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn precision_rejects_nonpositive_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", DIAG_DATA);
    for bad in ["0", "-1"] {
        let out = run(&["precision", f.to_str().unwrap(), "--lambda", bad]);
        assert_eq!(out.status.code(), Some(2));
        assert!(stderr(&out).contains("> 0"), "{}", stderr(&out));
    }
}

#[test]
fn precision_smoothed_gap() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", DIAG_DATA);
    let v = json(&run(&["precision", f.to_str().unwrap(), "--lambda", "0.5", "--eps", "1e-6"]));
    let gap = v["smoothed"]["gap_fro"].as_f64().unwrap();
    assert!(gap < 1e-2, "{gap}");
    assert!(v["smoothed"]["s_star"]["rows"].is_array());
}

#[test]
fn precision_unconverged_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "x.csv", "1,0.9,0.2\n-1,-0.8,0.1\n0.5,0.6,-0.3\n0.2,-0.1,0.9\n");
    let out = run(&["precision", f.to_str().unwrap(), "--lambda", "0.01", "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn wasserstein_cases() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0\n1\n");
    let b = write(dir.path(), "b.csv", "0\n3\n");
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());
    let v = json(&run(&["wasserstein", a, a, "--kind", "scalar"]));
    assert_eq!(v["w1"], 0.0);
    let v = json(&run(&["wasserstein", a, b, "--kind", "scalar"]));
    assert_eq!(v["w1"], 1.0);
    let v = json(&run(&["wasserstein", a, b, "--kind", "scalar", "--order", "2"]));
    assert!(v["lower"].as_f64().unwrap() <= v["upper"].as_f64().unwrap());
    let v = json(&run(&["wasserstein", a, a, "--order", "2"]));
    assert_eq!((v["lower"].as_f64().unwrap(), v["upper"].as_f64().unwrap()), (0.0, 0.0));
}

#[test]
fn wasserstein_matrix_atoms() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "1,0,0,1\n2,0,0,2\n");
    let b = write(dir.path(), "b.csv", "1,0,0,1\n2,0,0,3\n");
    let v = json(&run(&["wasserstein", a.to_str().unwrap(), b.to_str().unwrap(), "--kind", "matrix"]));
    assert!((v["w1"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn wasserstein_size_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0\n1\n");
    let b = write(dir.path(), "b.csv", "0\n1\n2\n");
    let out = run(&["wasserstein", a.to_str().unwrap(), b.to_str().unwrap(), "--kind", "scalar"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn portfolio_hand_case() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.csv", "1,0\n0,1\n");
    let v = json(&run(&["portfolio", "--mu", "0.1,0.2", "--sigma", s.to_str().unwrap(), "--z", "0.15"]));
    assert!((v["value"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert!((v["w"][0].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(v["dual_bound"]["holds"], true);
}

#[test]
fn portfolio_infeasible_lists_interval() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.csv", "1,0\n0,1\n");
    let out = run(&["portfolio", "--mu", "0.1,0.2", "--sigma", s.to_str().unwrap(), "--z", "0.3"]);
    assert_eq!(out.status.code(), Some(3));
    let e = stderr(&out);
    assert!(e.contains("0.1") && e.contains("0.2"), "{e}");
}

#[test]
fn portfolio_single_asset() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.csv", "0.4\n");
    let v = json(&run(&["portfolio", "--mu", "0.07", "--sigma", s.to_str().unwrap(), "--z", "0.07"]));
    assert!((v["w"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["value"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!(v["dual_bound"].is_null());
}

#[test]
fn experiment_writes_three_files_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&d1, &d2] {
        let out = run(&["--out", d.to_str().unwrap(), "experiment", &config("precision_sweep.json")]);
        let v = json(&out);
        assert_eq!(v["rows"], 5);
    }
    for f in ["report.json", "report.csv", "plot.svg"] {
        assert!(d1.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read(d1.join("report.csv")).unwrap(), fs::read(d2.join("report.csv")).unwrap());
    let svg = fs::read_to_string(d1.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("dK_hat"));
}

#[test]
fn experiment_alpha_zero_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "experiment", &config("alpha_zero.json")]);
    assert!(out.status.success());
    let rep: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let row = &rep["rows"][0];
    let base = rep["baseline"][0]["dk_hat"].as_f64().unwrap();
    let (dk, se) = (row["dk_hat"].as_f64().unwrap(), row["dk_se"].as_f64().unwrap());
    assert!((dk - base).abs() <= 3.0 * se + 1e-9, "dk {dk} base {base} se {se}");
    assert_eq!(row["pass"], true);
}

#[test]
fn experiment_seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = (dir.path().join("a"), dir.path().join("b"));
    let c = config("alpha_zero.json");
    assert!(run(&["--out", d1.to_str().unwrap(), "experiment", &c]).status.success());
    assert!(run(&["--seed", "99", "--out", d2.to_str().unwrap(), "experiment", &c]).status.success());
    assert_ne!(fs::read(d1.join("report.csv")).unwrap(), fs::read(d2.join("report.csv")).unwrap());
}

#[test]
fn experiment_bad_config_points_at_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&fs::read_to_string(config("alpha_zero.json")).unwrap()).unwrap();
    v["family"]["alphas"] = serde_json::json!([0.0, 1.5]);
    let f = write(dir.path(), "c.json", &v.to_string());
    let out = run(&["--out", dir.path().to_str().unwrap(), "experiment", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("/family/alphas/1"), "{}", stderr(&out));

    v["family"]["alphas"] = serde_json::json!([0.0]);
    v["statistic"] = serde_json::json!({"kind": "precision", "lambda": "big"});
    let f = write(dir.path(), "c.json", &v.to_string());
    let out = run(&["--out", dir.path().to_str().unwrap(), "experiment", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("/statistic/lambda"), "{}", stderr(&out));

    v["statistic"] = serde_json::json!({"kind": "covariance"});
    v["extra"] = serde_json::json!(1);
    let f = write(dir.path(), "c.json", &v.to_string());
    let out = run(&["--out", dir.path().to_str().unwrap(), "experiment", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("extra"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--format", "xml", "estimate", "x.csv"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
