use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polchinski"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("POLCHINSKI_THREADS").output().expect("binary runs")
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("polchinski-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn results(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("results.json")).unwrap()).unwrap()
}

#[test]
fn no_arguments_prints_catalogue() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gaussian-closed-form") && text.contains("transport"), "{text}");
}

#[test]
fn passing_run_exits_zero_with_schema_and_tolerances() {
    let dir = scratch("pass");
    let out = run(&["lsi", "run", "gaussian-exactness", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = results(&dir);
    assert_eq!(r["schema"], 1);
    assert!(r["build"]["git_describe"].is_string());
    let q = &r["quantities"]["multiscale/inverse_gamma"];
    assert_eq!(q["pass"], true);
    assert!(q["tolerance"].as_f64().unwrap() <= 1e-8);
    let run_info: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
    assert!(run_info["timestamp_unix"].is_u64());
}

#[test]
fn failed_check_exits_two() {
    let dir = scratch("fail");
    let cfg = dir.join("tight.json");
    std::fs::write(
        &cfg,
        r#"{"name": "tight", "task": "lsi", "params": {
            "model": {"coupling": {"kind": "identity", "value": 1.5}, "potential": {"kind": "quadratic", "m": 0.5}},
            "schedule": {"kind": "heat", "t_max": 40.0},
            "expect": [{"quantity": "multiscale/inverse_gamma", "relation": "at-most", "value": 0.1}]}}"#,
    )
    .unwrap();
    let out = run(&["lsi", "run", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(results(&dir.join("out"))["passed"], false);
}

#[test]
fn errors_exit_one() {
    let dir = scratch("err");
    assert_eq!(run(&["flow", "run", "no-such-config"]).status.code(), Some(1));
    let out = run(&["flow", "run", "ising-ring-n8-beta0.3", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/task"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn unknown_key_reports_pointer() {
    let dir = scratch("unknown");
    let cfg = dir.join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"name": "bad", "task": "ising", "params": {"rings": {"sizes": [4], "betas": [0.2], "tolerance": 1e-10}}}"#,
    )
    .unwrap();
    let out = run(&["ising", "run", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/params/rings/tolerance"), "{err}");
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (scratch("rerun-a"), scratch("rerun-b"));
    for (dir, threads) in [(&a, "1"), (&b, "2")] {
        let out = run(&["sample", "run", "martingale-double-well", "--out", dir.to_str().unwrap(), "--threads", threads, "--seed", "9"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["results.json", "martingale.csv"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file} differs");
    }
    assert_eq!(results(&a)["seed"], 9);
}

#[test]
fn thread_env_fallback_is_validated() {
    let out = bin().args(["hj", "run", "hopf-lax-double-well", "--out", scratch("env").to_str().unwrap()]).env("POLCHINSKI_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("POLCHINSKI_THREADS"));
}

#[test]
fn divergent_bound_is_reported_not_failed() {
    let dir = scratch("divergent");
    let out = run(&["lsi", "run", "lsi-divergent-beta1.5", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = results(&dir);
    assert_eq!(r["records"]["divergent"], true);
    assert_eq!(r["quantities"]["high-temperature/inverse_gamma"]["value"], "inf");
}
