use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_malliavin"))
        .args(args)
        .env("MALLIAVIN_THREADS", "1")
        .output()
        .unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

#[test]
fn suite_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["suite", "--seed", "5", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("report.csv").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("checks passed"));
}

#[test]
fn mutation_exits_with_one_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["suite", "--mutation", "flipped-correction", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let failing = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == "divergence.duality")
        .unwrap();
    assert_eq!(failing["pass"], false);
    let seed = failing["replay"]["seed"].as_u64().unwrap().to_string();
    let again = tempfile::tempdir().unwrap();
    let o = run(&[
        "suite",
        "--check",
        "divergence.duality",
        "--seed",
        &seed,
        "--mutation",
        "flipped-correction",
        "--out",
        &out_arg(again.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let replayed: serde_json::Value = serde_json::from_str(&fs::read_to_string(again.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(replayed["records"][0], *failing);
}

#[test]
fn missing_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"kind": "clark-ocone-convergence", "rv": {"expr": {"var": 0}, "directions": [{"interval": [0, 1]}]}}"#).unwrap();
    let o = run(&["clark-ocone", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.N"));
}

#[test]
fn kind_mismatch_and_missing_file_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.json");
    fs::write(&cfg, r#"{"kind": "gamma-constants", "space": {"m": 2}}"#).unwrap();
    assert_eq!(run(&["hedge", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["gamma", "--config", "/nonexistent/x.json"]).status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_two() {
    let o = Command::new(env!("CARGO_BIN_EXE_malliavin"))
        .args(["suite"])
        .env("MALLIAVIN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        let o = run(&["verify", "--seed", "42", "--out", &out_arg(d)]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["report.json", "report.csv", "config.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["clark-ocone", "--paths", "500", "--grid-n", "2", "--quad-order", "8", "--out", &out_arg(dir.path())]);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let ns: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ns, ["2", "4", "8", "16", "32"]);
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["budgets"]["paths"], 500);
    assert_eq!(cfg["budgets"]["quad_order"], 8);
}

#[test]
fn hedge_and_gamma_and_l1_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gamma", "--paths", "2000", "--out", &out_arg(&dir.path().join("g"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let cfg = dir.path().join("h.json");
    fs::write(
        &cfg,
        r#"{"kind": "hedging", "grid": {"T": 1, "N": 4}, "market": {"s0": 100, "sigma": 0.2}, "payoff": {"kind": "forward"}, "budgets": {"paths": 100}}"#,
    )
    .unwrap();
    let o = run(&["hedge", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir.path().join("h"))]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("h/hedge.json").exists());
    let o = run(&["l1", "--paths", "300", "--out", &out_arg(&dir.path().join("l"))]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    assert!(dir.path().join("l/l1.csv").exists());
}
