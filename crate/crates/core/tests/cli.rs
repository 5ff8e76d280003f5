use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_demand-bandit"));
    cmd.args(args).env_remove("DB_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_log_then_table2() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("logs/log.csv");
    let out = cli(&["gen-log", "--n", "2000", "--seed", "5", "--out", s(&log), "--price-sigma", "0.4"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), 2001);
    let meta = fs::read_to_string(dir.path().join("logs/log.meta.json")).unwrap();
    assert!(meta.contains("0.4"));

    let table = dir.path().join("table.csv");
    let out = cli(&["table2", "--log", s(&log), "--budget-frac", "0.1", "--out", s(&table)], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<Vec<String>> = text.lines().map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows[0], ["demand", "pv", "clicks", "gmv"]);
    for k in 0..3 {
        assert_eq!(rows[k + 1][k + 1].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn run_writes_metrics_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"name": "small", "rounds": 300, "n_units": 20}"#).unwrap();
    let mut bytes = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = cli(&["run", "--config", s(&config), "--seed", "2", "--out", s(&out_dir)], &[]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        bytes.push(fs::read(out_dir.join("metrics_small_2.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn sweep_honours_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("s.json");
    fs::write(
        &config,
        r#"{"base": {"rounds": 50, "n_units": 10}, "seeds": [0, 1],
            "arms": [{"name": "random", "agent_mode": "random_demand"}]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = cli(&["sweep", "--config", s(&config), "--out", s(&out_dir)], &[("DB_THREADS", "1")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary.csv").exists());

    let out = cli(&["sweep", "--config", s(&config)], &[("DB_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"rounds": 10, "learning_rate_typo": 1}"#).unwrap();
    let out = cli(&["run", "--config", s(&config)], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate_typo"));

    let missing = dir.path().join("nope.csv");
    let out = cli(&["table2", "--log", s(&missing), "--budget-frac", "0.1"], &[]);
    assert_eq!(out.status.code(), Some(2));

    assert_eq!(cli(&["run"], &[]).status.code(), Some(1));
    assert_eq!(cli(&["--help"], &[]).status.code(), Some(0));
}
