use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twophase::io::write_csv;
use twophase::simulation::{generate_complete, DgpParams};

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twophase-dr")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate_small(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--n", "300", "--rho", "0.4", "--reps", "3", "--seed", "5", "--out", "sim"];
    args.extend_from_slice(extra);
    cli(&args, dir)
}

#[test]
fn simulate_writes_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate_small(dir.path(), &["--raw"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = std::fs::read_to_string(dir.path().join("sim/summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("method,n,rho,pct_bias,rmse,coverage,mean_se,reps_completed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert!(rows[0].starts_with("naive_aipw,300,0.4,"));
    let raw = std::fs::read_to_string(dir.path().join("sim/replications.jsonl")).unwrap();
    assert_eq!(raw.lines().count(), 3);
    let m = json(&dir.path().join("sim/manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 3);
    assert!(m["started_at"].is_string() && m["finished_at"].is_string() && m["tool_version"].is_string());
}

#[test]
fn simulate_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["simulate", "--n", "300", "--rho", "1.5", "--reps", "2", "--out", "sim"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("rho"));
    assert!(!dir.path().join("sim/summary.csv").exists());
    assert_eq!(simulate_small(dir.path(), &["--jobs", "0"]).status.code(), Some(2));
    assert_eq!(simulate_small(dir.path(), &["--continuous-learner", "forest"]).status.code(), Some(2));
    assert_eq!(cli(&["simulate", "--bogus"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let one = cli(&["simulate", "--n", "300", "--rho", "0.4", "--reps", "4", "--seed", "9", "--jobs", "1", "--out", "a"], dir.path());
    let two = cli(&["simulate", "--n", "300", "--rho", "0.4", "--reps", "4", "--seed", "9", "--jobs", "3", "--out", "b"], dir.path());
    assert!(one.status.success() && two.status.success());
    let a = std::fs::read(dir.path().join("a/summary.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/summary.csv")).unwrap();
    assert_eq!(a, b);
}

fn write_complete_csv(path: &Path, n: usize) {
    let p = DgpParams::default();
    let d = generate_complete(&p, n, &mut ChaCha8Rng::seed_from_u64(17)).fully_observed();
    write_csv(&d, std::fs::File::create(path).unwrap()).unwrap();
}

fn ate(results: &serde_json::Value, method: &str) -> serde_json::Value {
    results
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["method"] == method && r["estimand"] == "ate")
        .cloned()
        .unwrap_or_else(|| panic!("no ate for {method}"))
}

#[test]
fn full_validation_reduces_os2_to_aipw() {
    let dir = tempfile::tempdir().unwrap();
    write_complete_csv(&dir.path().join("d.csv"), 800);
    let args = ["estimate", "--data", "d.csv", "--method", "os2", "--method", "oracle_aipw", "--out", "est.json"];
    let out = cli(&args, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let res = json(&dir.path().join("est.json"));
    assert_eq!(res.as_array().unwrap().len(), 6);
    let (os2, aipw) = (ate(&res, "os2"), ate(&res, "oracle_aipw"));
    let diff = (os2["point"].as_f64().unwrap() - aipw["point"].as_f64().unwrap()).abs();
    assert!(diff < 1e-8, "os2 and AIPW differ by {diff}");
    let m = json(&dir.path().join("est.manifest.json"));
    assert_eq!(m["command"], "estimate");
}

#[test]
fn confidence_level_sets_interval_width() {
    let dir = tempfile::tempdir().unwrap();
    write_complete_csv(&dir.path().join("d.csv"), 500);
    let width = |level: &str, out: &str| {
        let o = cli(&["estimate", "--data", "d.csv", "--method", "os1", "--ci-level", level, "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let r = ate(&json(&dir.path().join(out)), "os1");
        r["ci_high"].as_f64().unwrap() - r["ci_low"].as_f64().unwrap()
    };
    let ratio = width("0.9", "a.json") / width("0.95", "b.json");
    assert!((ratio - 1.644854 / 1.959964).abs() < 1e-5, "{ratio}");
}

#[test]
fn estimate_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x1,a_star,y_star,r,a,y,kappa\n0.5,1,2.0,1,1,,0.5\n").unwrap();
    let out = cli(&["estimate", "--data", "bad.csv", "--out", "e.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains('y'));
    let out = cli(&["estimate", "--data", "missing.csv", "--out", "e.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

fn summary_fixture(dir: &Path) {
    let out = cli(&["simulate", "--n", "200", "--rho", "0.3", "--rho", "0.6", "--reps", "2", "--out", "sim"], dir);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn report_pivots_each_metric() {
    let dir = tempfile::tempdir().unwrap();
    summary_fixture(dir.path());
    let out = cli(&["report", "--summary", "sim/summary.csv", "--out", "rep"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    for metric in ["bias", "rmse", "coverage"] {
        let text = std::fs::read_to_string(dir.path().join(format!("rep/{metric}.csv"))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "method,n=200 rho=0.3,n=200 rho=0.6");
        assert_eq!(lines.len(), 9);
    }
}

#[test]
fn report_draws_svg_panels() {
    let dir = tempfile::tempdir().unwrap();
    summary_fixture(dir.path());
    let out = cli(&["report", "--summary", "sim/summary.csv", "--out", "fig", "--format", "svg"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    for metric in ["bias", "rmse", "coverage"] {
        let text = std::fs::read_to_string(dir.path().join(format!("fig/{metric}.svg"))).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    }
    assert_eq!(json(&dir.path().join("fig/manifest.json"))["artifacts"].as_array().unwrap().len(), 4);
}

#[test]
fn report_rejects_an_empty_summary() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "method,n,rho,pct_bias,rmse,coverage,mean_se,reps_completed\n").unwrap();
    let out = cli(&["report", "--summary", "s.csv", "--out", "rep"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
