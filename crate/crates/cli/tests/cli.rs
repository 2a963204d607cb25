use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toral-lab"))
}

fn run(args: &[&str], out: &Path) -> Output {
    binary().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn summary(out: &Path, command: &str) -> Value {
    serde_json::from_slice(&std::fs::read(out.join(format!("{command}.json"))).unwrap()).unwrap()
}

const LINEAR: &str = "map={kind=\"example\"}";

#[test]
fn map_verify_on_the_undeformed_map_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["map-verify", "--seed", "3", "--set", LINEAR, "--samples", "2000", "--set", "map_verify.domination_points=500"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "map-verify");
    assert_eq!(s["pass"], true);
    assert_eq!(s["seed"], 3);
    for name in ["map-verify.csv", "map-verify.manifest.json", "map-verify.log"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn lyapunov_on_the_undeformed_map_matches_the_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["lyapunov", "--seed", "5", "--set", LINEAR], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path(), "lyapunov");
    let l = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let expected = [2.0 * l, l, -l, -2.0 * l];
    for (e, o) in s["metrics"]["exponents"].as_array().unwrap().iter().zip(expected) {
        assert!((e.as_f64().unwrap() - o).abs() <= 1e-3);
    }
    assert_eq!(s["checks"].as_array().unwrap().len(), 5);
}

#[test]
fn srb_with_one_disk_twice_has_zero_distance() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "srb",
            "--seed",
            "9",
            "--set",
            "srb.disk_b=[0.13, 0.71, 0.37, 0.52]",
            "--n",
            "50",
            "--samples",
            "1000",
            "--set",
            "srb.resamples=2",
            "--set",
            "srb.cloud_n=200",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(dir.path(), "srb");
    assert_eq!(s["metrics"]["distance"], 0.0);
    assert_eq!(s["pass"], true);
}

#[test]
fn threshold_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["lyapunov", "--seed", "1", "--n", "100", "--set", "lyapunov.tolerance=1e-300"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(dir.path(), "lyapunov")["pass"], false);
    assert!(String::from_utf8_lossy(&out.stdout).contains("failed"));
}

#[test]
fn invalid_fields_exit_with_one_and_are_named() {
    let dir = tempfile::tempdir().unwrap();
    for (args, field) in [
        (vec!["lyapunov", "--seed", "1", "--set", "lyapunov.n=\"many\""], "lyapunov.n"),
        (vec!["lyapunov", "--seed", "1", "--set", "lyapunov.steps=3"], "lyapunov"),
        (vec!["lyapunov", "--seed", "1", "--n", "10"], "lyapunov.n"),
        (vec!["lyapunov"], "seed"),
        (vec!["srb", "--seed", "1", "--set", "srb.disk_a=[0.1, 0.2]"], "srb.disk_a"),
        (vec!["holonomy", "--seed", "1", "--set", "holonomy.radii=[0.01]"], "holonomy.radii"),
        (vec!["map-verify", "--seed", "1", "--set", "map.delta=-1"], "map"),
    ] {
        let out = run(&args, dir.path());
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {err}");
        assert!(err.contains(field), "{args:?}: {err}");
    }
    let out = run(&["lyapunov", "--seed", "1", "--set", "lyapunov.steps=3"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("steps"));
}

#[test]
fn config_file_and_map_file_are_read() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("linear.toml"), "kind = \"example\"\n").unwrap();
    std::fs::write(dir.path().join("run.toml"), "seed = 4\nmap_file = \"linear.toml\"\n\n[lyapunov]\nn = 2000\ntolerance = 0.05\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = binary().arg("lyapunov").arg("--config").arg(dir.path().join("run.toml")).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Value = serde_json::from_slice(&std::fs::read(out_dir.join("lyapunov.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["lyapunov"]["n"], 2000);
    assert_eq!(manifest["config"]["map"]["kind"], "example");
    assert_eq!(manifest["versions"]["toral-lab"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["map_hash"], summary(&out_dir, "lyapunov")["map_hash"]);
    let both = dir.path().join("both.toml");
    std::fs::write(&both, "seed = 4\nmap_file = \"linear.toml\"\n[map]\nkind = \"example\"\n").unwrap();
    let out = binary().arg("lyapunov").arg("--config").arg(&both).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("map_file"));
}

#[test]
fn outputs_do_not_depend_on_the_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["distortion", "--seed", "2", "--set", "distortion.pairs=12"];
    let one = binary().args(args).args(["--threads", "1", "--out"]).arg(a.path()).output().unwrap();
    let two = binary().args(args).args(["--threads", "3", "--out"]).arg(b.path()).output().unwrap();
    assert_eq!(one.status.code(), two.status.code());
    for file in ["distortion.json", "distortion.csv", "distortion.log"] {
        assert_eq!(std::fs::read(a.path().join(file)).unwrap(), std::fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}
