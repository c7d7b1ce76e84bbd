use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbf")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn simulated(dir: &Path, t: usize) -> String {
    let cfg = write_config(dir, "sim.toml", &format!("[simulate]\nt = {t}\nburnin = 100\n"));
    let out = dir.join("series.rcov");
    let o = cbf(&["simulate", "--config", &cfg, "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.to_str().unwrap().to_owned()
}

#[test]
fn simulate_is_deterministic_and_writes_header() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulated(dir.path(), 50);
    let first = std::fs::read_to_string(&a).unwrap();
    let again = simulated(dir.path(), 50);
    assert_eq!(first, std::fs::read_to_string(again).unwrap());
    assert!(first.starts_with("#rcov v1 n=3 T=50\n"));
    assert_eq!(first.lines().count(), 51);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{a}.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], "cbf-report");
    assert_eq!(manifest["version"], 1);
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.rcov");
    let o = cbf(&["fit", "--input", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["error"]["category"], "io");

    let bad = write_config(dir.path(), "bad.toml", "[model]\nfamliy = \"wishart\"\n");
    let o = cbf(&["fit", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));

    let rcov = dir.path().join("neg.rcov");
    std::fs::write(&rcov, "#rcov v1 n=2 T=2\n1 0 1\n-1 0 1\n").unwrap();
    let o = cbf(&["fit", "--input", rcov.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = cbf(&["simulate", "--threads", "0", "--out", dir.path().join("x").to_str().unwrap()]);
    assert!(o.status.success(), "simulate does not use the pool");
    let o = cbf(&["replicate", "--threads", "0", "--reps", "2"]);
    assert_eq!(o.status.code(), Some(2));

    let o = cbf(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_reports_round_trip_into_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulated(dir.path(), 400);

    let vt = write_config(dir.path(), "vt.toml", "[model]\nvt = true\n[diagnose]\nlags = [2]\n");
    let report = dir.path().join("fit.json");
    let o = cbf(&["fit", "--config", &vt, "--input", &input, "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(fit["kind"], "fit");
    assert!(fit["s_hat"].is_array());
    assert!(fit["log_likelihood"].as_f64().unwrap().is_finite());

    let o = cbf(&["diagnose", "--config", &vt, "--input", &input, "--fit-report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d = json(&o);
    assert_eq!(d["test"], "pi_v");
    let p = d["rows"][0]["p"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));

    let zero = write_config(dir.path(), "zero.toml", "[diagnose]\nlags = [0]\n");
    let o = cbf(&["diagnose", "--config", &zero, "--input", &input]);
    assert_eq!(o.status.code(), Some(2));

    let w = write_config(dir.path(), "w.toml", "[model]\nfamily = \"wishart\"\n");
    let o = cbf(&["fit", "--config", &w, "--input", &input]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let names: Vec<String> =
        json(&o)["parameters"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap().to_owned()).collect();
    assert!(names.contains(&"nu1".to_owned()));
    assert!(!names.contains(&"nu2".to_owned()));
}

#[test]
fn factor_writes_ratio_table_and_full_rank_has_no_static_part() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulated(dir.path(), 120);
    let cfg = write_config(dir.path(), "f.toml", "[factor]\nrank = 3\n");
    let out = dir.path().join("factor");
    let o = cbf(&["factor", "--config", &cfg, "--input", &input, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("eigen_ratios.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("i,eigenvalue,ratio"));
    assert_eq!(csv.lines().count(), 4);
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(out.join("factor.json")).unwrap()).unwrap();
    for row in rep["static_part"].as_array().unwrap() {
        for x in row.as_array().unwrap() {
            assert!(x.as_f64().unwrap().abs() < 1e-10);
        }
    }
    let factors = std::fs::read_to_string(out.join("factors.rcov")).unwrap();
    assert!(factors.starts_with("#rcov v1 n=3 T=120"));
}

#[test]
fn forecast_flags_degenerate_comparisons() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulated(dir.path(), 240);
    let cfg = write_config(
        dir.path(),
        "fc.toml",
        "[forecast]\nwindow = 200\nhorizons = [1, 5]\nrefit_every = 40\nvar_har = true\n\
         [[forecast.models]]\nvt = true\n[[forecast.models]]\nvt = true\n",
    );
    let o = cbf(&["forecast", "--config", &cfg, "--input", &input, "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["origins"], 36);
    let dm = r["dm"].as_array().unwrap();
    let twin: Vec<&Value> = dm.iter().filter(|d| d["model"] == r["reference"]).collect();
    assert!(!twin.is_empty() && twin.iter().all(|d| d["error"].is_string() && d["statistic"].is_null()));
    assert!(dm.iter().any(|d| d["model"] == "VAR-HAR" && d["statistic"].is_number()));
}
