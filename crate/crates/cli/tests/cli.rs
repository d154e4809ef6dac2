use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn selfish(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfish")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn flag_errors_exit_two() {
    let o = selfish(&["optimize", "--alpha", "0.6", "--gamma", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha must be < 0.5"));

    let o = selfish(&["optimize", "--alpha", "0.35", "--gamma", "0", "--eps", "3", "--json-errors"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["exit_code"], 2);
    assert!(err["error"]["message"].as_str().unwrap().contains("eps"));

    let o = selfish(&["simulate", "--policy", "honest", "--rounds", "10", "--json-errors"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);

    let o = selfish(&["optimize", "--alpha", "0.3", "--no-such-flag", "--json-errors"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(serde_json::from_slice::<serde_json::Value>(&o.stderr).is_ok());
}

#[test]
fn optimize_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = selfish(&["optimize", "--alpha", "0.3", "--gamma", "0.5", "--T", "25", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bounds = read_json(&dir.path().join("bounds.json"));
    let lower = bounds["lower_bound"].as_f64().unwrap();
    let rho = bounds["rho_final"].as_f64().unwrap();
    assert!(stdout(&o).starts_with("lower_bound "));

    let policy = dir.path().join("policy.json");
    let policy = policy.to_str().unwrap();
    let eval_dir = dir.path().join("eval");
    let o = selfish(&["evaluate", "--policy", policy, "--out", eval_dir.to_str().unwrap()]);
    assert!(o.status.success());
    let rev = read_json(&eval_dir.join("evaluate.json"))["rev"].as_f64().unwrap();
    // lower_bound is rho - eps and the policy earns rho to within eps
    assert!((rev - rho).abs() < 1e-5, "{rev} vs {rho}");
    assert!(rev > lower);

    let manifest = read_json(&eval_dir.join("manifest.json"));
    assert_eq!(manifest["subcommand"], "evaluate");
    assert_eq!(manifest["inputs"][0], policy);

    // a policy computed for other parameters needs --force
    let o = selfish(&["evaluate", "--policy", policy, "--gamma", "0", "--out", eval_dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = selfish(&["evaluate", "--policy", policy, "--gamma", "0", "--force", "--out", eval_dir.to_str().unwrap()]);
    assert!(o.status.success());
}

#[test]
fn evaluate_sm1_reference_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfish(&["evaluate", "--policy", "sm1", "--alpha", "0.45", "--gamma", "0", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let rev = read_json(&dir.path().join("evaluate.json"))["rev"].as_f64().unwrap();
    assert!((rev - 0.65177).abs() < 1e-4, "{rev}");
}

#[test]
fn render_honest_table() {
    let o = selfish(&["render", "--policy", "honest", "--alpha", "0.3", "--gamma", "0", "--view", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "a\\h   0   1   2   3");
    assert_eq!(lines[1], "  0 *** aa* *** ***");
    assert_eq!(lines[2], "  1 o** *** *** ***");
    assert_eq!(lines.len(), 5);
}

#[test]
fn malformed_policy_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"truncation\": 3, \"actions\": [\"adopt\"]}").unwrap();
    let o = selfish(&["render", "--policy", path.to_str().unwrap(), "--alpha", "0.3", "--gamma", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn delay_reports_min_k() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfish(&[
        "delay", "--alpha", "0.3", "--lambda", "1", "--d-ah", "0", "--d-ha", "0", "--rho", "0.3",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(report["min_k"], 3);
    assert_eq!(read_json(&dir.path().join("delay.json")), report);
}

#[test]
fn simulate_seed_controls_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = selfish(&[
            "simulate", "--policy", "sm1", "--alpha", "0.35", "--gamma", "0.5", "--rounds", "20000",
            "--replicas", "4", "--seed", seed, "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        fs::read_to_string(out.join("simulate.csv")).unwrap()
    };
    let a = run("11", "a");
    assert_eq!(a, run("11", "b"));
    assert_ne!(a, run("12", "c"));
    assert!(a.starts_with("replica,seed,rev\n0,11,"));
    assert!(!a.contains('\r'));
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfish(&[
        "sweep", "--alphas", "0.2,0.3", "--gammas", "0.5", "--T", "10", "--eps", "1e-4", "--jobs", "2",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,gamma,variant,T,epsilon,honest_rev,sm1_rev,lower_bound,upper_bound,ceiling");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.200000,0.500000,standard,10,1e-4,0.200000,"));
}
