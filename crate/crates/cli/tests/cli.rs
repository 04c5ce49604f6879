use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mhd2d_core::io::read_snapshot;
use serde_json::Value;

fn mhd2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhd2d")).args(args).output().unwrap()
}

fn out_dir(dir: &Path) -> String {
    format!("output_dir={}", dir.display())
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn list_experiments_names_every_recipe() {
    let o = mhd2d(&["list-experiments"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in [
        "dispersion",
        "linear-decay",
        "block-energy",
        "energy-identity",
        "lagrangian-smalldata",
        "eulerian-smalldata",
        "cross-validate",
        "build-initial-data",
        "norms-selftest",
        "bony-selftest",
        "roundtrip",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn unknown_experiment_lists_recipes() {
    let o = mhd2d(&["warp-drive"]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("warp-drive") && err.contains("dispersion") && err.contains("roundtrip"));
}

#[test]
fn schema_violations_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"grid": {"nx": 32, "nz": 4}}"#).unwrap();
    let o = mhd2d(&["dispersion", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("nz"));
    let o = mhd2d(&["dispersion", "--set", "time.dt=0"]);
    assert!(!o.status.success());
    let o = mhd2d(&["lagrangian-smalldata", "--set", "exponents.s1=0.5"]);
    assert!(!o.status.success());
}

#[test]
fn config_experiment_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"experiment": "roundtrip"}"#).unwrap();
    assert!(!mhd2d(&["dispersion", "--config", cfg.to_str().unwrap()]).status.success());
}

#[test]
fn overrides_reach_the_config() {
    let o = mhd2d(&["print-config", "--set", "grid.nx=48", "--set", "initial.construction=potential"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["grid"]["nx"], 48);
    assert_eq!(v["grid"]["ny"], 64);
    assert_eq!(v["initial"]["construction"], "potential");
}

#[test]
fn dispersion_writes_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = mhd2d(&["dispersion", "--set", "grid.nx=16", "--set", "grid.ny=16", "--set", &out_dir(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["experiment"], "dispersion");
    assert_eq!(r["pass"], true);
    for a in r["assertions"].as_array().unwrap() {
        for key in ["assertion", "expected", "observed", "tolerance", "pass"] {
            assert!(a.get(key).is_some(), "{key}");
        }
    }
    let table = fs::read_to_string(dir.path().join("ledgers/dispersion.csv")).unwrap();
    // header plus every nonzero lattice point
    assert_eq!(table.lines().count(), 1 + 16 * 16 - 1);
}

#[test]
fn snapshots_have_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let o = mhd2d(&["roundtrip", "--set", "grid.nx=32", "--set", "grid.ny=32", "--set", &out_dir(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (f, side) = read_snapshot(&dir.path().join("fields/psi.bin")).unwrap();
    assert_eq!((side.nx, side.ny, side.t), (32, 32, 0.0));
    assert!(f.max_abs() > 0.0);
}

#[test]
fn failed_assertion_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = mhd2d(&["dispersion", "--set", "grid.nx=16", "--set", "tolerances.vieta=0", "--set", &out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(report(dir.path())["pass"], false);
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = mhd2d(&[
            "block-energy",
            "--set",
            "grid.nx=32",
            "--set",
            "grid.ny=32",
            "--set",
            "time.t_final=2",
            "--set",
            "seed=3",
            "--set",
            &out_dir(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        ["report.json", "ledgers/energy.csv", "ledgers/decay_table.csv"].map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}
