mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::config_path;
use conekit::diagnostics::{parse_node_csv, parse_sweep_csv};

fn conekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conekit"))
        .args(args)
        .env_remove("CONEKIT_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn small_constant(out: &Path) -> String {
    format!(
        r#"{{
  "schema": "conekit/1",
  "model": {{"kernel": {{"family": "constant", "kappa": 1.0}}, "sizes": 16}},
  "grid": {{"horizon": 1.0, "steps": 32}},
  "outputs": {{"directory": {:?}, "trajectory": true}}
}}"#,
        out.to_str().unwrap()
    )
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let o = conekit(&[flag]);
        assert_eq!(o.status.code(), Some(0), "{flag}");
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(conekit(&[]).status.code(), Some(1));
    assert_eq!(conekit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(conekit(&["solve"]).status.code(), Some(1));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_constant(&dir.path().join("out")));
    let o = Command::new(env!("CARGO_BIN_EXE_conekit"))
        .args(["solve", "--config", &cfg])
        .env("CONEKIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CONEKIT_THREADS"));
}

#[test]
fn solve_writes_ledgers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &small_constant(&out));
    let o = conekit(&["solve", "--config", &cfg]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("PASS "));

    let nodes = parse_node_csv(&std::fs::read(out.join("ledger.csv")).unwrap()).unwrap();
    assert_eq!(nodes.len(), 33);
    assert_eq!(nodes[0].t, 0.0);
    assert!(nodes.iter().all(|r| (r.mass - 1.0).abs() < 1e-6));
    let sweeps = parse_sweep_csv(&std::fs::read(out.join("sweeps.csv")).unwrap()).unwrap();
    assert!(sweeps.iter().all(|s| s.order_violations == 0));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary.lines().count(), 1);
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 33 * 16);

    // no temp files left next to the outputs
    let names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(
        sorted,
        ["ledger.csv", "summary.txt", "sweeps.csv", "trajectory.csv"]
    );
}

#[test]
fn quiet_suppresses_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_constant(&dir.path().join("out")));
    let o = conekit(&["solve", "--config", &cfg, "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_constant(&dir.path().join("unused")));
    let mut ledgers = Vec::new();
    for (i, threads) in ["1", "4", "1"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = Command::new(env!("CARGO_BIN_EXE_conekit"))
            .args(["solve", "--config", &cfg, "--out", out.to_str().unwrap()])
            .env("CONEKIT_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        ledgers.push((
            std::fs::read(out.join("ledger.csv")).unwrap(),
            std::fs::read(out.join("sweeps.csv")).unwrap(),
            std::fs::read(out.join("trajectory.csv")).unwrap(),
        ));
    }
    assert!(ledgers.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn audit_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("bench_constant.json");
    let cfg = cfg.to_str().unwrap();
    let read = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = conekit(&[
            "audit",
            "--config",
            cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out.join("audit.json")).unwrap()
    };
    let a = read("a", "11");
    assert_eq!(a, read("b", "11"));
    assert_ne!(a, read("c", "12"));
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["seed"], 11);
}

#[test]
fn multiplicative_audit_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("audit_multiplicative.json");
    let o = conekit(&[
        "audit",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stdout).contains("A3.lambda1"));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("audit.json")).unwrap()).unwrap();
    let failed: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["A3.lambda1"]);
    // solving refuses the same model
    let o = conekit(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let bad = [
        // λ₀ = 0
        format!(
            r#"{{"schema": "conekit/1", "model": {{"kernel": {{"family": "constant", "kappa": 1.0}}, "lambda0": 0.0, "sizes": 8}},
               "grid": {{"horizon": 1.0, "steps": 8}}, "outputs": {{"directory": {out:?}}}}}"#
        ),
        // asymmetric table
        format!(
            r#"{{"schema": "conekit/1", "model": {{"kernel": {{"family": "tabulated", "rates": [[1.0, 0.5], [0.25, 1.0]]}}, "sizes": 2}},
               "grid": {{"horizon": 1.0, "steps": 8}}, "outputs": {{"directory": {out:?}}}}}"#
        ),
        // unknown field
        format!(
            r#"{{"schema": "conekit/1", "model": {{"kernel": {{"family": "additive"}}, "sizes": 8, "colour": 1}},
               "grid": {{"horizon": 1.0, "steps": 8}}, "outputs": {{"directory": {out:?}}}}}"#
        ),
        // wrong schema
        format!(
            r#"{{"schema": "conekit/0", "model": {{"kernel": {{"family": "additive"}}, "sizes": 8}},
               "grid": {{"horizon": 1.0, "steps": 8}}, "outputs": {{"directory": {out:?}}}}}"#
        ),
        "not json".to_owned(),
    ];
    for body in &bad {
        let cfg = write_config(dir.path(), body);
        for cmd in ["solve", "audit"] {
            let o = conekit(&[cmd, "--config", &cfg]);
            assert_eq!(
                o.status.code(),
                Some(2),
                "{cmd} {body}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
        }
    }
    let o = conekit(&[
        "solve",
        "--config",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_step_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let body = format!(
        r#"{{"schema": "conekit/1", "model": {{"kernel": {{"family": "constant", "kappa": 1.0}}, "sizes": 64}},
           "initial": {{"monodisperse": {{"n0": 10.0}}}},
           "grid": {{"horizon": 1.0, "steps": 4}}, "outputs": {{"directory": {:?}}}}}"#,
        out.to_str().unwrap()
    );
    let cfg = write_config(dir.path(), &body);
    let o = conekit(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("STEP_TOO_LARGE"));
}

#[test]
fn transport_needs_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_constant(&dir.path().join("out")));
    assert_eq!(
        conekit(&["transport", "--config", &cfg]).status.code(),
        Some(2)
    );
}

#[test]
fn oracle_and_compare_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &small_constant(&out));
    assert_eq!(
        conekit(&["oracle", "--config", &cfg]).status.code(),
        Some(0)
    );
    let oracle = std::fs::read_to_string(out.join("oracle.csv")).unwrap();
    assert!(oracle.starts_with("t,N,mass\n"));
    assert_eq!(oracle.lines().count(), 34);
    let o = conekit(&["compare", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let compare = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(compare.starts_with("t,distance\n"));
}
