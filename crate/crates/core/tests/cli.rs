use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn run(suite: &str, config: &Path, out: &Path, workers: Option<&str>) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mhflab"));
    cmd.arg(suite).arg("--config").arg(config).arg("--out").arg(out);
    cmd.env_remove("MHFLAB_WORKERS");
    if let Some(w) = workers {
        cmd.env("MHFLAB_WORKERS", w);
    }
    let output = cmd.output().unwrap();
    (
        output.status.code().unwrap(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn hf_config(interaction: Value, t_final: f64, dt: f64) -> Value {
    json!({
        "suite": "hf-evolve",
        "dim": 1,
        "points_per_axis": 101,
        "half_length": 6.0,
        "potential": {"name": "harmonic"},
        "hbar_ladder": [0.2],
        "n_particles": 4,
        "interaction": interaction,
        "t_final": t_final,
        "dt": dt
    })
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn stationary_free_evolution_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "free.json", &hf_config(json!({"name": "none"}), 0.5, 0.01));
    let out = dir.path().join("out");
    let (code, stderr) = run("hf-evolve", &config, &out, None);
    assert_eq!(code, 0, "{stderr}");
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "suite,param_json,metric,value,verdict,wall_ms");
    assert!(csv.contains("free_evolution_error"));
    assert!(!csv.contains(",fail,"));
    let m = manifest(&out);
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["config"]["suite"], "hf-evolve");
    for artifact in ["report.txt", "monitor.csv", "monitor.svg"] {
        assert!(out.join(artifact).exists(), "{artifact}");
    }
}

#[test]
fn huge_step_fails_energy_drift_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = hf_config(json!({"name": "gaussian", "amplitude": 1.0, "width": 0.5}), 5.0, 0.5);
    let config = write_config(dir.path(), "bad.json", &cfg);
    let out = dir.path().join("out");
    let (code, stderr) = run("hf-evolve", &config, &out, Some("1"));
    assert_eq!(code, 1, "{stderr}");
    let mut reader = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let failing: Vec<String> = reader
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[4] == "fail")
        .map(|r| r[2].to_string())
        .collect();
    assert!(failing.contains(&"energy_drift".to_string()), "{failing:?}");
    assert_eq!(manifest(&out)["status"], "fail");
}

#[test]
fn missing_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = run("weyl", &dir.path().join("absent.json"), &dir.path().join("out"), None);
    assert_eq!(code, 2);
    assert!(stderr.contains("absent.json"), "{stderr}");
}

#[test]
fn invalid_config_lists_every_error_and_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"suite": "weyl", "hbar_ladder": [0.1, -0.05], "mu": 1.0, "dim": 3});
    let config = write_config(dir.path(), "bad.json", &cfg);
    let (code, stderr) = run("weyl", &config, &dir.path().join("out"), None);
    assert_eq!(code, 2);
    assert!(stderr.contains("hbar_ladder[1]"), "{stderr}");
    assert!(stderr.contains("`dim`"), "{stderr}");

    let typo = json!({"suite": "weyl", "hbar_ladder_typo": [0.1], "mu": 1.0});
    let config = write_config(dir.path(), "typo.json", &typo);
    let (code, stderr) = run("weyl", &config, &dir.path().join("out"), None);
    assert_eq!(code, 2);
    assert!(stderr.contains("hbar_ladder_typo"), "{stderr}");
}

#[test]
fn suite_argument_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "free.json", &hf_config(json!({"name": "none"}), 0.1, 0.01));
    let (code, stderr) = run("weyl", &config, &dir.path().join("out"), None);
    assert_eq!(code, 2);
    assert!(stderr.contains("does not match"), "{stderr}");
    let (code, _) = run("no-such-suite", &config, &dir.path().join("out"), None);
    assert_eq!(code, 2);
}

#[test]
fn module_error_is_recorded_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "suite": "mb-compare",
        "points_per_axis": 81,
        "half_length": 5.0,
        "n_list": [2],
        "modes": 4,
        "t_final": 0.1,
        "dt": 0.01,
        "checkpoints": [0.0, 0.015]
    });
    let config = write_config(dir.path(), "cmp.json", &cfg);
    let out = dir.path().join("out");
    let (code, stderr) = run("mb-compare", &config, &out, None);
    assert_eq!(code, 2, "{stderr}");
    let m = manifest(&out);
    assert_eq!(m["status"], "error");
    assert!(m["error"].as_str().unwrap().contains("checkpoint"), "{m}");
}

fn csv_without_wall_time(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().take(5).map(str::to_string).collect())
        .collect()
}

#[test]
fn reruns_are_identical_apart_from_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "suite": "identities",
        "dim": 2,
        "points_per_axis": 21,
        "half_length": 3.0,
        "gauge": {"name": "symmetric"},
        "hbar_ladder": [0.3],
        "b_ladder": [0.0, 1.0],
        "seed": 11,
        "corpus_size": 20
    });
    let config = write_config(dir.path(), "id.json", &cfg);
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    assert_eq!(run("identities", &config, &first, Some("1")).0, 0);
    assert_eq!(run("identities", &config, &second, Some("3")).0, 0);
    let a = csv_without_wall_time(&first.join("results.csv"));
    assert!(!a.is_empty());
    assert_eq!(a, csv_without_wall_time(&second.join("results.csv")));
}

#[test]
fn zero_workers_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "free.json", &hf_config(json!({"name": "none"}), 0.1, 0.01));
    let (code, stderr) = run("hf-evolve", &config, &dir.path().join("out"), Some("0"));
    assert_eq!(code, 2, "{stderr}");
}
