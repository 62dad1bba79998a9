use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_contactkit"));
    c.env_remove("CONTACTKIT_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn sample_model() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models/torus_rp1.toml")
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn check_builtin_models() {
    for args in [
        &["check", "--model", "primer", "--n", "2"][..],
        &["check", "--model", "canonical", "--n", "1"],
        &["check", "--model", "primer2", "--n", "2"],
        &["check", "--model", "primer2-reduced", "--n", "1"],
    ] {
        let out = run(args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v = json(&out);
        assert_eq!(v["ok"], true);
        assert_eq!(v["config"]["command"], "check");
        assert_eq!(v["config"]["tolerances"]["validation"], 1e-8);
    }
}

#[test]
fn corrupted_config_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(sample_model()).unwrap();
    let bad = text.replace("transition = \"J1\"", "transition = \"1.5*J1\"");
    assert_ne!(bad, text);
    let path = dir.path().join("bad.toml");
    fs::write(&path, bad).unwrap();
    let out = run(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["ok"], false);
    let failure = v["failure"].as_str().unwrap();
    assert!(
        failure.contains("form compatibility") && failure.contains("V0-V1"),
        "{failure}"
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("form compatibility"));

    // other commands refuse the model outright
    let out = run(&["flow", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_model_checks_and_flows() {
    let cfg = sample_model();
    let out = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["config"]["model"]["source"], "config");
    let out = run(&["freq", "--config", cfg.to_str().unwrap(), "--t-final", "50"]);
    let v = json(&out);
    let f = &v["frequencies"];
    assert!((f[0]["omega"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    assert!(f[1]["omega"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn missing_inputs_are_io_errors() {
    assert_eq!(
        run(&["check", "--config", "/nonexistent/model.toml"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["flow"]).status.code(), Some(1));
    assert_eq!(
        run(&["flow", "--model", "primer", "--rtol", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["flow", "--model", "primer", "--x0", "1,2"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["check", "--model", "primer", "--format", "csv"]).status.code(),
        Some(1)
    );
}

#[test]
fn flow_writes_csv_and_switch_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("traj.csv");
    let out = run(&[
        "flow",
        "--model",
        "primer",
        "--n",
        "2",
        "--omega",
        "1,1.4142135623730951",
        "--f",
        "2 + sin(phi)",
        "--t-final",
        "10",
        "--samples",
        "20",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_path).unwrap();
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["t", "chart", "x0", "x1", "x2", "x3", "x4"]);
    assert_eq!(rows.len(), 21);
    // 17 significant digits
    assert_eq!(rows[1][0], "5.0000000000000000e-1");
    let last: Vec<f64> = rows[20][2..].iter().map(|s| s.parse().unwrap()).collect();
    let expect_phi0 = (0.1 + 10.0f64).rem_euclid(std::f64::consts::TAU);
    assert!((last[0] - expect_phi0).abs() < 1e-8);
    let side: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("traj.switches.json")).unwrap()).unwrap();
    assert_eq!(side["chart_switches"].as_array().unwrap().len(), 0);
    assert_eq!(side["config"]["x0"].as_array().unwrap().len(), 5);
    assert_eq!(side["charts"][2]["coordinates"][3], "J0");
}

#[test]
fn flow_records_chart_switches() {
    // J0 = 2000 puts the V0 guard below the switch threshold
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("t.csv");
    let out = run(&[
        "flow",
        "--model",
        "primer",
        "--n",
        "1",
        "--omega",
        "1",
        "--chart",
        "V0",
        "--x0",
        "0.1,0.2,2000",
        "--t-final",
        "1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("t.switches.json")).unwrap()).unwrap();
    let switches = side["chart_switches"].as_array().unwrap();
    assert!(!switches.is_empty());
    assert_eq!(switches[0]["from"], "V0");
    assert_eq!(switches[0]["to"], "V1");
    let (_, rows) = csv_rows(&fs::read_to_string(&out_path).unwrap());
    let last = rows.last().unwrap();
    assert_eq!(last[1], "V1");
    // J in V1 is the reciprocal of J in V0
    assert!((last[4].parse::<f64>().unwrap() - 5e-4).abs() < 1e-15);
}

#[test]
fn integrator_failure_exits_3() {
    // q0' = q0² blows up at t = 1
    let out = run(&[
        "flow",
        "--model",
        "canonical",
        "--n",
        "1",
        "--f",
        "q0^2",
        "--x0",
        "1,0,0",
        "--t-final",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("t = 0.99"), "{err}");
}

fn classify_counts(args: &[&str]) -> (Value, Vec<Vec<String>>) {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("c.csv");
    let mut full = vec!["classify"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", out_path.to_str().unwrap()]);
    let out = run(&full);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c.summary.json")).unwrap()).unwrap();
    let (header, rows) = csv_rows(&fs::read_to_string(&out_path).unwrap());
    assert_eq!(&header[header.len() - 3..], ["stratum", "dimE", "dimF"]);
    (summary, rows)
}

#[test]
fn classify_zero_locus_matches_membership() {
    let (summary, rows) = classify_counts(&["--model", "primer2", "--n", "2", "--f", "sin(phi)", "--samples", "400"]);
    assert_eq!(summary["total"], 400);
    let mut zero = 0;
    for r in &rows {
        let v: Vec<f64> = r[1..6].iter().map(|s| s.parse().unwrap()).collect();
        let member = r[0] == "V2" && v[3] == 0.0 && v[4] == 0.0 && v[2].sin().abs() < 1e-8;
        assert_eq!(r[6] == "ZeroLocus", member, "{r:?}");
        if member {
            zero += 1;
            assert_eq!(r[8], "2");
        }
    }
    assert!(zero > 0);
    assert_eq!(summary["counts"]["ZeroLocus"], zero);
}

#[test]
fn classify_positive_f_has_no_zero_locus() {
    let (summary, rows) = classify_counts(&["--model", "primer", "--n", "2", "--samples", "300"]);
    assert!(summary["counts"].get("ZeroLocus").is_none());
    assert!(rows.iter().all(|r| r[6] != "ZeroLocus"));
}

#[test]
fn classify_canonical_is_regular() {
    let (summary, rows) = classify_counts(&["--model", "canonical", "--n", "1", "--samples", "100"]);
    assert_eq!(summary["counts"]["RegularTransverse"], 100);
    assert!(rows
        .iter()
        .all(|r| r[4] == "RegularTransverse" && r[5] == "1" && r[6] == "1"));
}

#[test]
fn freq_and_actions() {
    let out = run(&["freq", "--model", "primer", "--n", "2", "--t-final", "100"]);
    let v = json(&out);
    let omegas: Vec<f64> = v["frequencies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["omega"].as_f64().unwrap())
        .collect();
    let want = [1.0, 2f64.sqrt(), 0.0];
    for (a, b) in omegas.iter().zip(want) {
        assert!((a - b).abs() < 1e-6);
    }
    assert_eq!(v["config"]["angles"], serde_json::json!([0, 1, 2]));

    let out = run(&[
        "actions",
        "--model",
        "primer",
        "--n",
        "2",
        "--x0",
        "0.3,0.2,0.1,1.25,-0.75",
    ]);
    let v = json(&out);
    let vals: Vec<f64> = v["actions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["value"].as_f64().unwrap())
        .collect();
    for (a, b) in vals.iter().zip([1.0, 1.25, -0.75]) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!(v["actions"].as_array().unwrap().iter().all(|r| r["converged"] == true));
}

#[test]
fn seeded_runs_are_deterministic_across_thread_counts() {
    let args = [
        "classify",
        "--model",
        "primer2",
        "--samples",
        "200",
        "--seed",
        "7",
        "--format",
        "json",
    ];
    let a = run(&args);
    let b = bin().args(args).env("CONTACTKIT_THREADS", "1").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    let (mut va, mut vb) = (json(&a), json(&b));
    assert_eq!(vb["summary"]["config"]["threads"], 1);
    va["summary"]["config"]["threads"] = Value::Null;
    vb["summary"]["config"]["threads"] = Value::Null;
    assert_eq!(va, vb);
    let c = run(&[
        "classify",
        "--model",
        "primer2",
        "--samples",
        "200",
        "--seed",
        "8",
        "--format",
        "json",
    ]);
    assert_ne!(json(&c)["points"], va["points"]);
    let bad = bin().args(args).env("CONTACTKIT_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
