use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otdr"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

/// Small dataset and a one-epoch model on 256-point inputs.
fn trained(dir: &Path) {
    write(dir, "cnn.json", r#"{"input_len": 256, "epochs": 1}"#);
    let o = run(&["dataset", "--out", "ds", "--n", "10", "--seed", "5"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(
        &[
            "train",
            "--manifest",
            "ds/manifest.jsonl",
            "--cnn-config",
            "cnn.json",
            "--out",
            "w.json",
        ],
        dir,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

const ROUTE: &str = r#"{"waypoints": [{"lat": 0.0, "lon": 0.0}, {"lat": 0.0, "lon": 0.1}]}"#;

#[test]
fn usage_errors_exit_1() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&[], d.path())), 1);
    assert_eq!(code(&run(&["frobnicate"], d.path())), 1);
    assert_eq!(code(&run(&["synth", "--out", "x.csv"], d.path())), 1);
    assert_eq!(
        code(&run(
            &["synth", "--reference", "4", "--out", "x.csv"],
            d.path()
        )),
        1
    );
    assert_eq!(code(&run(&["locate", "--route", "r.json"], d.path())), 1);
    assert_eq!(code(&run(&["--help"], d.path())), 0);
    assert_eq!(code(&run(&["--version"], d.path())), 0);
}

#[test]
fn synth_writes_trace_and_echoes_seed() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "synth",
            "--reference",
            "1",
            "--out",
            "t.csv",
            "--seed",
            "99",
        ],
        d.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("seeds: rng_seed=99"));
    let text = std::fs::read_to_string(d.path().join("t.csv")).unwrap();
    assert!(text.starts_with("# spacing_m=1\n"));
    assert!(text.contains("# rng_seed=99\n"));
    assert!(text.contains("distance_m,power_db\n"));
    // 10,001 rows plus header and metadata.
    assert!(text.lines().count() > 10_001);

    let o = run(
        &["synth", "--reference", "1", "--out", "c.csv", "--clean"],
        d.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("clean"));
}

#[test]
fn malformed_inputs_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write(p, "bad.json", "{\"events\": [");
    let o = run(&["synth", "--scenario", "bad.json", "--out", "t.csv"], p);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    assert!(!p.join("t.csv").exists());

    let o = run(
        &["synth", "--scenario", "missing.json", "--out", "t.csv"],
        p,
    );
    assert_eq!(code(&o), 2);

    write(p, "acq.json", r#"{"sample_spacing_m": -1.0}"#);
    let o = run(&["dataset", "--acquisition", "acq.json", "--out", "ds"], p);
    assert_eq!(code(&o), 2);

    write(p, "trace.csv", "distance_m,power_db\n0,1\n1,oops\n");
    write(p, "w.json", "{}");
    let o = run(
        &["diagnose", "--trace", "trace.csv", "--weights", "w.json"],
        p,
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn unwritable_output_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        &["synth", "--reference", "0", "--out", "no/such/dir/t.csv"],
        d.path(),
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn locate_prints_coordinates_and_rejects_overruns() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    write(p, "route.json", ROUTE);
    let o = run(&["locate", "--route", "route.json", "--distance", "0"], p);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("lat 0.000000000, lon 0.000000000"));
    assert!(stdout(&o).contains("seeds:"));

    let o = run(&["locate", "--route", "route.json", "--distance", "1e9"], p);
    assert_eq!(code(&o), 2);
    let o = run(&["locate", "--route", "route.json", "--distance", "-5"], p);
    assert_eq!(code(&o), 2);

    write(
        p,
        "one.json",
        r#"{"waypoints": [{"lat": 0.0, "lon": 0.0}]}"#,
    );
    let o = run(&["locate", "--route", "one.json", "--distance", "0"], p);
    assert_eq!(code(&o), 2);
}

#[test]
fn dataset_train_eval_diagnose_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    trained(p);
    let manifest = std::fs::read_to_string(p.join("ds/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 10);
    assert!(p.join("ds/traces/000009.csv").exists());
    assert!(p.join("ds/sampler.json").exists());
    assert!(p.join("w.log.csv").exists());

    // Training seed 5 is recorded in the weights, so reusing it for the test
    // set is refused.
    let o = run(
        &[
            "eval",
            "--weights",
            "w.json",
            "--n",
            "4",
            "--seed",
            "5",
            "--out",
            "r.json",
        ],
        p,
    );
    assert_eq!(code(&o), 2);
    assert!(!p.join("r.json").exists());

    let o = run(
        &[
            "eval",
            "--weights",
            "w.json",
            "--n",
            "6",
            "--seed",
            "6",
            "--out",
            "r.json",
        ],
        p,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("seeds:"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["dataset"]["n_traces"], 6);
    assert_eq!(report["seeds"]["test_master_seed"], 6);
    assert_eq!(report["seeds"]["train_master_seed"], 5);
    for key in ["traditional_thresholding", "proposed_ai_model"] {
        let m = &report["methods"][key];
        assert!(m["detection_accuracy"].is_number());
        assert!(m["mean_latency_s"].is_number());
    }
    let table = std::fs::read_to_string(p.join("r.txt")).unwrap();
    assert!(table.contains("Detection Accuracy"));
    assert!(table.contains("Proposed AI Model"));

    write(p, "route.json", ROUTE);
    let o = run(&["synth", "--reference", "3", "--out", "c.csv"], p);
    assert_eq!(code(&o), 0);
    let o = run(
        &[
            "diagnose",
            "--trace",
            "c.csv",
            "--weights",
            "w.json",
            "--route",
            "route.json",
        ],
        p,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(
        out.contains("traditional thresholding: Connector at 8000.00 m"),
        "{out}"
    );
    assert!(out.contains("proposed AI model:"));
    assert!(out.contains("location: lat"));

    // A route shorter than the detected distance fails without a partial
    // report.
    write(
        p,
        "short.json",
        r#"{"waypoints": [{"lat": 0.0, "lon": 0.0}, {"lat": 0.0, "lon": 0.01}]}"#,
    );
    let o = run(
        &[
            "diagnose",
            "--trace",
            "c.csv",
            "--weights",
            "w.json",
            "--route",
            "short.json",
        ],
        p,
    );
    assert_eq!(code(&o), 2);
    assert!(!stdout(&o).contains("traditional thresholding:"));
}

#[test]
fn threshold_flags_override_defaults() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    trained(p);
    run(
        &["synth", "--reference", "1", "--out", "s.csv", "--clean"],
        p,
    );
    let o = run(&["diagnose", "--trace", "s.csv", "--weights", "w.json"], p);
    assert!(stdout(&o).contains("traditional thresholding: Splice at 3000.00 m"));
    let o = run(
        &[
            "diagnose",
            "--trace",
            "s.csv",
            "--weights",
            "w.json",
            "--loss-cutoff-db",
            "0.9",
        ],
        p,
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("traditional thresholding: no fault"));
    let o = run(
        &[
            "diagnose",
            "--trace",
            "s.csv",
            "--weights",
            "w.json",
            "--window-m",
            "0.5",
        ],
        p,
    );
    assert_eq!(code(&o), 2);
}
