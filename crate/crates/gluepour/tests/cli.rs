use std::path::Path;
use std::process::{Command, Output};

fn gluepour(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gluepour")).args(args).env("GLUEPOUR_WORKERS", "2").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

const SCENARIO: &str = r#"{
  "processing_cost": 0.25,
  "battery": null,
  "epochs": [
    { "duration": 2.0, "energy": 3.0, "data": 0.5, "gains": [1.0, 0.5] },
    { "duration": 1.0, "energy": 1.0, "data": 0.5, "gains": [0.8, 0.9] }
  ]
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = gluepour(&["--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_scenario_source_is_a_usage_error() {
    assert_eq!(gluepour(&["solve-throughput"]).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let o = gluepour(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("solve-throughput"));
}

#[test]
fn golden_throughput_with_cost_override() {
    let o = gluepour(&["--json", "solve-throughput", "--golden", "reference-throughput", "--eps-override", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!((v["throughput"].as_f64().unwrap() - 5.66802).abs() < 1e-4);
    assert_eq!(v["processing_cost"].as_f64(), Some(0.0));
}

#[test]
fn validation_error_exits_two() {
    let o = gluepour(&["solve-energy", "--golden", "reference-throughput"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unbounded battery"));
}

#[test]
fn solver_error_exits_one() {
    let o = gluepour(&["solve-energy", "--golden", "reference-energy", "--eps-override", "0.6"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.json", "{ not json");
    assert_eq!(gluepour(&["solve-throughput", "--scenario", &p]).status.code(), Some(2));
}

#[test]
fn feasibility_boundary() {
    let at = |eps: &str| {
        let o = gluepour(&["--json", "check-feasibility", "--golden", "reference-energy", "--eps-override", eps]);
        assert_eq!(o.status.code(), Some(0));
        json(&o)["feasible"].as_bool().unwrap()
    };
    assert!(at("0.49"));
    assert!(!at("0.5"));
}

#[test]
fn completion_time() {
    let o = gluepour(&["--json", "solve-tct", "--golden", "reference-energy"]);
    let v = json(&o);
    assert!((v["t_min"].as_f64().unwrap() - 8.26).abs() < 0.05);
    assert_eq!(v["bracket_epoch"].as_u64(), Some(2));
}

#[test]
fn solve_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", SCENARIO);
    let pol = dir.path().join("p.json");
    let pol = pol.to_str().unwrap();
    let o = gluepour(&["solve-energy", "--scenario", &s, "--policy-out", pol]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = gluepour(&["--json", "verify", "--scenario", &s, "--policy", pol, "--kind", "energy"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(json(&o)["passed"].as_bool(), Some(true));
}

#[test]
fn verify_rejects_a_suboptimal_policy() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", &SCENARIO.replace("null", "10.0"));
    let p = write(dir.path(), "p.json", r#"{"power":[[0.5,0],[0,0]],"duration":[[2,0],[0,0]]}"#);
    let o = gluepour(&["verify", "--scenario", &s, "--policy", &p, "--kind", "throughput"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("FAIL"));
}

#[test]
fn golden_reports_every_check() {
    let o = gluepour(&["--json", "golden"]);
    let v = json(&o);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 9);
    let all = checks.iter().all(|c| c["passed"].as_bool().unwrap());
    assert_eq!(o.status.code(), Some(if all { 0 } else { 1 }));
}

#[test]
fn simulate_online_writes_per_seed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("seeds.csv");
    let o = gluepour(&[
        "simulate-online", "--kind", "throughput", "--policy", "myopic", "--seeds", "5",
        "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("seed,feasible,offline,online"));
    assert!(stdout(&o).starts_with("variable,value,seeds"));
}

#[test]
fn sweep_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"kind":"throughput","sweep":"energy_rate","grid":[1,2],"seeds":8,
            "params":{"channels":2,"blocks":4,"block_length":1,"gain_rate":1,"energy_max":10,
                      "data_max":0,"processing_cost":1,"battery":10}}"#,
    );
    let a = gluepour(&["sweep", "--config", &cfg]);
    let b = Command::new(env!("CARGO_BIN_EXE_gluepour"))
        .args(["sweep", "--config", &cfg])
        .env("GLUEPOUR_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 3);
}

#[test]
fn cost_sweep_is_non_increasing() {
    let o = gluepour(&["cost-sweep", "--golden", "reference-throughput", "--to", "0.95", "--points", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 20);
    for w in rows.windows(2) {
        assert!(w[1][1] <= w[0][1] + 1e-5 && w[1][2] <= w[0][2] + 1e-5, "{w:?}");
    }
}
