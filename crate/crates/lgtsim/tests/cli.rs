use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qudit_lgt::formats::CsvTable;

fn lgtsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgtsim")).args(args).env("LGTSIM_THREADS", "2").output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_accepts_includes_and_rejects_bad_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.cfg", "include = fig4\nsteps = 3 # short\n");
    let o = lgtsim(&["validate", &good]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    for body in ["include = fig4\nsteps = three\n", "colour = red\n", "include = fig4\norder = 4\n", "include = missing.cfg\n"] {
        let bad = write(dir.path(), "bad.cfg", body);
        assert_eq!(lgtsim(&["validate", &bad]).status.code(), Some(2), "{body}");
    }
    assert_eq!(lgtsim(&["preset", "fig9", "--out", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn wrong_group_for_experiment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.cfg", "include = fig4\ngroup = q8\n");
    assert_eq!(lgtsim(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn resources_preset_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = lgtsim(&["preset", "resources-ahm", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["config.json", "step.circuit", "gate_counts.csv", "resources.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("resources.json")).unwrap()).unwrap();
    assert_eq!(report["pulse_estimate"], 9);
    assert_eq!(report["projection"]["step"]["totals"]["group-multiplication"], 48);
}

#[test]
fn short_quench_writes_both_backends() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.cfg", "include = fig4\nsteps = 4\n");
    let out = dir.path().join("q");
    let o = lgtsim(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for backend in ["trotter", "exact"] {
        let t = CsvTable::from_text(&fs::read_to_string(out.join(format!("energy_{backend}.csv"))).unwrap()).unwrap();
        assert_eq!(t.rows.len(), 5);
        assert_eq!(t.column("t").unwrap()[0].parse::<f64>().unwrap(), 0.0);
    }
    let s: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(s["max_gauge_matter_deviation"].as_f64().unwrap() < 0.1);
}

#[test]
fn overflowing_couplings_exit_with_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "n.cfg", "include = fig4\nsteps = 2\nbackend = trotter\nlambda_e = 1e308\n");
    let o = lgtsim(&["run", &cfg, "--out", dir.path().join("n").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_lgtsim")).args(["presets"]).env("LGTSIM_THREADS", "many").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = lgtsim(&["presets"]);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 5);
}
