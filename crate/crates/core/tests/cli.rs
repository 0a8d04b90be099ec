use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lcdf"))
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], out: &Path) -> (i32, Option<Value>) {
    let status = bin().args(args).arg("--out").arg(out).env_remove("LCDF_THREADS").output().unwrap();
    let code = status.status.code().unwrap();
    let result = std::fs::read_to_string(out.join("result.json"))
        .ok()
        .map(|s| serde_json::from_str(&s).unwrap());
    (code, result)
}

#[test]
fn fisher_gaussian_reports_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = crate_dir().join("configs/fisher_gaussian.json");
    let (code, v) = run(&["fisher", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 0);
    assert_eq!(v.unwrap()["F"], 1.0);
}

#[test]
fn exact_fixture_paths_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = crate_dir().join("configs/exact_tiny.json");
    let (code, v) = run(&["exact", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 0);
    let v = v.unwrap();
    assert_eq!(v["agree"], true);
    assert!(v["max_relative_difference"].as_f64().unwrap() <= 1e-10);
    let degrees = v["degrees"].as_array().unwrap();
    let last = degrees.last().unwrap()["cadv_exact"].as_f64().unwrap();
    let chi2 = v["chi_squared"].as_f64().unwrap();
    assert!((last * last - 1.0 - chi2).abs() < 1e-12);
}

#[test]
fn selftest_passes_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = run(&["selftest"], dir.path());
    assert_eq!(code, 0);
    assert!(v.unwrap()["failed"].as_array().unwrap().is_empty());
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let no_seed = write_config(
        d,
        "a.json",
        r#"{"prior": {"kind": "iid", "n": 4}, "channel": {"kind": "bernoulli", "c": 0.5}, "degree": 2, "trials": 10}"#,
    );
    assert_eq!(run(&["advantage", "--config", no_seed.to_str().unwrap()], &d.join("o1")).0, 2);
    let unknown = write_config(d, "b.json", r#"{"seed": 1, "chanel": {}}"#);
    assert_eq!(run(&["fisher", "--config", unknown.to_str().unwrap()], &d.join("o2")).0, 2);
    let mismatch = write_config(d, "c.json", r#"{"command": "overlap", "seed": 1}"#);
    assert_eq!(run(&["fisher", "--config", mismatch.to_str().unwrap()], &d.join("o3")).0, 2);
    let bad_domain = write_config(
        d,
        "d.json",
        r#"{"seed": 1, "channel": {"kind": "bernoulli", "c": 0.5}, "points": [[0.9, 0.1]]}"#,
    );
    assert_eq!(run(&["overlap", "--config", bad_domain.to_str().unwrap()], &d.join("o4")).0, 2);
    assert_eq!(run(&["fisher"], &d.join("o5")).0, 2);
    assert_eq!(run(&["no-such-command"], &d.join("o6")).0, 2);
}

#[test]
fn numerical_failures_map_to_three() {
    let e = lcdf::LcdfError::Numerical {
        message: "x".into(),
        achieved: 1.0,
    };
    assert_eq!(lcdf::cli::exit_code(&e), 3);
    assert_eq!(lcdf::cli::exit_code(&lcdf::LcdfError::Validation("x".into())), 2);
}

#[test]
fn advantage_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "adv.json",
        r#"{"command": "advantage", "seed": 4,
            "prior": {"kind": "spiked_matrix", "n": 12, "lambda": 0.8},
            "channel": {"kind": "additive", "density": {"family": "logistic", "fisher": 1.0}},
            "degree": 4, "trials": 3000}"#,
    );
    let c = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let e = dir.path().join("e");
    assert_eq!(run(&["advantage", "--config", c, "--threads", "1"], &a).0, 0);
    assert_eq!(run(&["advantage", "--config", c, "--threads", "4"], &b).0, 0);
    let status = bin()
        .args(["advantage", "--config", c, "--out"])
        .arg(&e)
        .env("LCDF_THREADS", "3")
        .status()
        .unwrap();
    assert!(status.success());
    let ra = std::fs::read(a.join("result.json")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("result.json")).unwrap());
    assert_eq!(ra, std::fs::read(e.join("result.json")).unwrap());
    let v: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(v["result"]["estimator"], "subset_formula");
    assert!(v["result"]["std_error"].as_f64().unwrap() > 0.0);

    let d = dir.path().join("d");
    assert_eq!(run(&["advantage", "--config", c, "--seed", "5"], &d).0, 0);
    assert_ne!(ra, std::fs::read(d.join("result.json")).unwrap());
}

#[test]
fn phase_diagram_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scan.json",
        r#"{"seed": 2, "scan": {"n": 60, "lambda_grid": [0.5, 3.0], "eta": [0.0, 0.5],
            "density": {"family": "gaussian"}, "corruption": "censor", "trials": 3}}"#,
    );
    let out = dir.path().join("out");
    let (code, v) = run(&["phase-diagram", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(code, 0);
    let v = v.unwrap();
    assert_eq!(v["scan"]["conjecture_probe"], true);
    let csv = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,eta,n,trials,mean_lmax,stderr_lmax,bulk_edge_estimate");
    assert_eq!(lines.len(), 5);
    let mean: f64 = lines[1].split(',').nth(4).unwrap().parse().unwrap();
    assert_eq!(mean, v["scan"]["points"][0]["mean_lmax"].as_f64().unwrap());
}

#[test]
fn bundled_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(crate_dir().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let cfg: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let cmd = cfg["command"].as_str().unwrap();
        let out = dir.path().join(path.file_stem().unwrap());
        let (code, v) = run(&[cmd, "--config", path.to_str().unwrap()], &out);
        assert_eq!(code, 0, "{}", path.display());
        assert_eq!(v.unwrap()["command"], cmd);
    }
}
