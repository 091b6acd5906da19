//! End-to-end runs of the `fracblow` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracblow_cli::output::{read_csv, FieldRow};
use fracblow_cli::ExperimentConfig;
use tempfile::TempDir;

fn fracblow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracblow"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    serde_json::from_str(stdout(o).trim()).expect("error output is JSON")
}

#[derive(serde::Deserialize)]
struct CtauRow {
    tau: f64,
    value: f64,
}

#[test]
fn ctau_scan_brackets_the_root() {
    let dir = TempDir::new().unwrap();
    let out = fracblow(dir.path(), &["ctau", "--alpha", "0.5", "--scan", "50"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let rows: Vec<CtauRow> = read_csv(&dir.path().join("out/ctau.csv")).unwrap();
    assert_eq!(rows.len(), 50);
    let crossings: Vec<(f64, f64)> = rows
        .windows(2)
        .filter(|w| (w[0].value > 0.0) != (w[1].value > 0.0))
        .map(|w| (w[0].tau, w[1].tau))
        .collect();
    assert_eq!(crossings.len(), 1);
    assert!(crossings[0].0 < -0.5 && crossings[0].1 > -0.5);
    assert!(stdout(&out).contains("tau0 = -0.5000000000"));
}

#[test]
fn zero_nonlinearity_reproduces_the_potential() {
    let dir = TempDir::new().unwrap();
    let grid = ["--n-theta", "4", "--grid-rho-min", "1e-3"];
    let solve = fracblow(dir.path(), &[&["solve", "--alpha", "0.5", "--p", "0", "--k", "1"][..], &grid].concat());
    assert!(solve.status.success(), "{}", stdout(&solve));
    let pot = fracblow(dir.path(), &[&["potential", "--alpha", "0.5"][..], &grid].concat());
    assert!(pot.status.success(), "{}", stdout(&pot));
    let u: Vec<FieldRow> = read_csv(&dir.path().join("out/solve.csv")).unwrap();
    let p: Vec<FieldRow> = read_csv(&dir.path().join("out/potential.csv")).unwrap();
    assert_eq!(u.len(), p.len());
    for (a, b) in u.iter().zip(&p) {
        assert_eq!((a.rho, a.theta), (b.rho, b.theta));
        assert!((a.value - b.value).abs() <= 1e-12 * b.value);
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/solve.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["iterations"], 1);
    assert!(report["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["metadata"]["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn identical_configs_give_identical_csv() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["solve", "--p", "2.5", "--k", "2", "--n-theta", "4", "--grid-rho-min", "1e-3"];
    assert!(fracblow(a.path(), &args).status.success());
    assert!(fracblow(b.path(), &args).status.success());
    assert_eq!(fs::read(a.path().join("out/solve.csv")).unwrap(), fs::read(b.path().join("out/solve.csv")).unwrap());
}

#[test]
fn config_files_round_trip_and_flags_override_them() {
    let dir = TempDir::new().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.alpha = 0.3;
    cfg.output.dir = dir.path().join("out");
    let path = dir.path().join("exp.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fracblow"))
        .args(["show-config", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains(&format!("# config_hash: {}", cfg.hash())), "{text}");
    let printed: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_eq!(ExperimentConfig::from_toml(&printed).unwrap(), cfg);

    let out = Command::new(env!("CARGO_BIN_EXE_fracblow"))
        .args(["show-config", "--alpha", "0.7", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(stdout(&out).contains("alpha = 0.7"));
}

#[test]
fn module_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let out = fracblow(dir.path(), &["solve", "--alpha", "0.5", "--p", "3", "--n-theta", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let e = error_json(&out);
    assert_eq!(e["error"]["kind"], "subcriticality_violated");
    assert_eq!(e["exit_code"], 1);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = fracblow(dir.path(), &["ctau", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "alpha = \"half\"\n").unwrap();
    let out = fracblow(dir.path(), &["ctau", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = fracblow(dir.path(), &["solve", "--measure", "dirac", "--dim", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_is_read_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let run = |value: &str| {
        Command::new(env!("CARGO_BIN_EXE_fracblow"))
            .args(["ctau", "--scan", "5", "--out"])
            .arg(dir.path().join("out"))
            .env("FRACBLOW_THREADS", value)
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    let out = run("many");
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");
}

#[test]
fn verify_all_refuses_mismatched_artifacts() {
    let dir = TempDir::new().unwrap();
    assert!(fracblow(dir.path(), &["ctau", "--scan", "5"]).status.success());
    let artifact = dir.path().join("out/ctau.csv");
    let ok = fracblow(dir.path(), &["verify-all", "--quick", "--only", "1", "--aggregate", artifact.to_str().unwrap()]);
    assert!(ok.status.success(), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("[PASS] 1"));
    let mismatch = fracblow(
        dir.path(),
        &["verify-all", "--quick", "--only", "1", "--alpha", "0.4", "--aggregate", artifact.to_str().unwrap()],
    );
    assert_eq!(mismatch.status.code(), Some(2));
    assert_eq!(error_json(&mismatch)["error"]["kind"], "hash_mismatch");
}

#[test]
fn quick_suite_prints_one_line_per_criterion() {
    let dir = TempDir::new().unwrap();
    let out = fracblow(dir.path(), &["verify-all", "--quick"]);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).collect();
    assert_eq!(lines.len(), 9, "{text}");
    let failed = lines.iter().any(|l| l.starts_with("[FAIL]"));
    assert_eq!(out.status.code(), Some(if failed { fracblow_cli::CRITERIA_FAILED as i32 } else { 0 }));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/verify.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["total"], 9);
}
