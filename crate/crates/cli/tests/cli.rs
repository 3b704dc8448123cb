use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posted-price")).args(args).output().unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_json_and_csv_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bin(&[
        "run", "--setting", "mhr-sample", "--dist", "trunc-exp", "--H", "16", "--eps", "0.1", "--delta", "0.1",
        "--trials", "8", "--seed", "3", "--trace", "--out", out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["trials"], 8);
    let rate = report["success_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert_eq!(report["per_trial"].as_array().unwrap().len(), 8);
    assert_eq!(read_json(&dir.path().join("trace.json"))["algorithm"], "unified");

    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("schema_version,"));
}

#[test]
fn fixed_seed_gives_identical_reports() {
    let run = |dir: &Path| {
        let o = bin(&[
            "run", "--setting", "regular-range", "--dist", "lb-regular-minus", "--eps", "0.1", "--delta", "0.2",
            "--trials", "1", "--seed", "11", "--out", dir.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.join("report.json")).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(bin(&["run", "--dist", "point-mass", "--eps", "0.1", "--delta", "0.1"]).status.code(), Some(2));
    assert_eq!(bin(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    let bad_eps = bin(&["run", "--setting", "mhr-range", "--dist", "point-mass", "--eps", "1.5", "--delta", "0.1"]);
    assert_eq!(bad_eps.status.code(), Some(2));
    let mismatch = bin(&["run", "--setting", "mhr-range", "--dist", "lb-general", "--eps", "0.1", "--delta", "0.1"]);
    assert_eq!(mismatch.status.code(), Some(2));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn distribution_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("atoms.json");
    std::fs::write(&spec, r#"{"family":"discrete-atoms","params":{"values":[1.0,2.0,4.0],"masses":[0.5,0.3,0.2]}}"#).unwrap();
    let o = bin(&[
        "run", "--setting", "general-range", "--dist", spec.to_str().unwrap(), "--H", "4", "--eps", "0.2",
        "--delta", "0.5", "--trials", "2", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&dir.path().join("report.json"))["H"], 4.0);
}

#[test]
fn verify_exit_codes_follow_the_fact_table() {
    let general = bin(&["verify", "--instance", "lb-general", "--grid", "100000"]);
    assert_eq!(general.status.code(), Some(0), "{}", String::from_utf8_lossy(&general.stdout));
    assert!(String::from_utf8_lossy(&general.stdout).contains("disjoint"));

    assert_eq!(bin(&["verify", "--instance", "lb-mhr-pair", "--grid", "100000"]).status.code(), Some(0));
    assert_eq!(bin(&["verify", "--instance", "lb-mhr-pair", "--eps", "0.1"]).status.code(), Some(2));

    let regular = bin(&["verify", "--instance", "lb-regular-pair", "--grid", "100000"]);
    assert_eq!(regular.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&regular.stdout).contains("F+ regular"));
    let small = bin(&["verify", "--instance", "lb-regular-pair", "--H", "14", "--grid", "100000"]);
    assert_eq!(small.status.code(), Some(0));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "sweep", "--setting", "mhr-range", "--dist", "trunc-exp", "--H", "16", "--eps", "0.1", "--delta", "0.1",
        "--trials", "3", "--param", "eps", "--values", "0.1,0.07,0.05", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let report = read_json(&dir.path().join("sweep.json"));
    assert_eq!(report["parameter"], "eps");
    assert!(report["log_log_slope"].as_f64().unwrap() > 1.0);
}

#[test]
fn calibrate_reports_the_chosen_constant() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "calibrate", "--setting", "mhr-range", "--dist", "point-mass", "--value", "5", "--H", "8", "--eps", "0.1",
        "--delta", "0.1", "--trials", "40", "--ladder", "1,2", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // 40 of 40 puts the Wilson lower bound at 0.912, above the 0.9 target.
    let report = read_json(&dir.path().join("calibration.json"));
    assert_eq!(report["chosen_c"], 1.0);
    assert_eq!(report["reports"].as_array().unwrap().len(), 2);
    assert_eq!(std::fs::read_to_string(dir.path().join("calibration.csv")).unwrap().lines().count(), 3);
}
