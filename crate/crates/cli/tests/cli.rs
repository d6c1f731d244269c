use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptcurved")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.take_while(|l| !l.is_empty()).map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn flat_neumann_levels() {
    let o = run(&["solve", "--curvature", "0", "--a", "0.7853981634", "--alpha", "0", "--beta", "0", "--m", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("index,m,re,im,residual,simple,multiplicity,certificate\n"));
    let re = column(&out, "re");
    for (z, want) in re.iter().zip([0.0, 4.0, 16.0, 36.0]) {
        assert!((z - want).abs() < 1e-8, "{z} vs {want}");
    }
}

#[test]
fn json_mirrors_csv_fields() {
    let csv = stdout(&run(&["solve", "--curvature", "+1", "--alpha", "1", "--n-eigs", "3"]));
    let json = stdout(&run(&["solve", "--curvature", "+1", "--alpha", "1", "--n-eigs", "3", "--format", "json"]));
    let v: Value = serde_json::from_str(&json).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let keys: Vec<&str> = rows[0].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(header, keys);
    let re = column(&csv, "re");
    assert_eq!(rows.len(), re.len());
    for (r, z) in rows.iter().zip(&re) {
        assert_eq!(r["re"].as_f64().unwrap(), *z);
    }
    assert_eq!(v["certificate"].as_u64().unwrap() as usize, re.len());
}

#[test]
fn sphere_rejects_wide_strip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["solve", "--curvature", "+1", "--a", "1.6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("a < pi/2"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn nonconvergence_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&["solve", "--tol", "1e-30", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_values_are_config_errors() {
    for args in [
        &["solve", "--curvature", "2"][..],
        &["solve", "--alpha", "x"],
        &["solve", "--alpha", "1", "--b", "0.1"],
        &["solve", "--b", "-1"],
        &["solve", "--b", "1", "--c", "-2"],
        &["verify", "transform", "--curvature", "0"],
        &["sweep", "--param", "beta"],
        &["solve", "--re-min", "5", "--re-max", "1"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn identical_runs_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = (0..2).map(|k| dir.path().join(format!("s{k}.json"))).collect();
    for f in &files {
        let o = run(&["solve", "--curvature", "-1", "--alpha", "2", "--m", "1", "--format", "json", "--out", f.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&files[0]).unwrap(), std::fs::read(&files[1]).unwrap());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"alpha": 1, "beta": 0, "a": "pi/4", "n-eigs": 2}"#).unwrap();
    let from_file = column(&stdout(&run(&["solve", "--config", cfg.to_str().unwrap()])), "re");
    assert!((from_file[0] - 1.0).abs() < 1e-8);
    let flagged = column(&stdout(&run(&["solve", "--config", cfg.to_str().unwrap(), "--alpha", "3"])), "re");
    assert!(flagged.iter().any(|z| (z - 9.0).abs() < 1e-8), "{flagged:?}");
}

#[test]
fn verify_suites_pass() {
    for args in [
        &["verify", "transform", "--curvature", "+1", "--alpha", "1", "--m", "0"][..],
        &["verify", "closed-form", "--curvature", "0", "--alpha", "3.1", "--beta", "-0.5"],
        &["verify", "pt-pairs", "--curvature", "-1", "--alpha", "3"],
        &["verify", "adjoint", "--curvature", "0", "--b", "0.5", "--c", "0.2", "--phi", "1", "--random-cases", "2"],
    ] {
        let o = run(args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        let out = stdout(&o);
        assert!(out.lines().skip(1).all(|l| l.contains(",true,")), "{out}");
    }
}

#[test]
fn random_cases_follow_seed() {
    let args = |seed: &'static str| run(&["verify", "adjoint", "--random-cases", "2", "--seed", seed]);
    assert_eq!(stdout(&args("11")), stdout(&args("11")));
    assert_ne!(stdout(&args("11")), stdout(&args("12")));
}

#[test]
fn sweep_writes_events_side_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("branches.csv");
    let o = run(&["sweep", "--beta", "-0.5", "--from", "0", "--to", "3.2", "--step", "0.05", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let branches = std::fs::read_to_string(&out).unwrap();
    assert!(branches.starts_with("parameter,m,branch,re,im\n"));
    let events = std::fs::read_to_string(Path::new(dir.path()).join("branches.events.csv")).unwrap();
    let creations: Vec<&str> = events.lines().filter(|l| l.contains("pair_creation")).collect();
    assert_eq!(creations.len(), 2, "{events}");
    let loc: f64 = creations[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!((loc - 8.75f64.sqrt()).abs() < 5e-2, "{loc}");
}

#[test]
fn oracle_agrees_with_shooting() {
    let o = run(&["oracle", "--curvature", "0", "--alpha", "1", "--beta", "0.5", "--grid", "200", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["deviation"].as_f64().unwrap() < 1e-4);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn spectrum2d_contains_shifted_modes() {
    let out = stdout(&run(&["spectrum2d", "--alpha", "1", "--m-max", "2", "--n-eigs", "2"]));
    let re = column(&out, "re");
    for want in [1.0, 2.0, 4.0, 5.0, 8.0] {
        assert!(re.iter().any(|z| (z - want).abs() < 1e-8), "{want} missing from {re:?}");
    }
}
