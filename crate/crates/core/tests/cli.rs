use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn subdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subdiff")).args(args).output().unwrap()
}

fn out_dir(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn regimes_writes_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(dir.path(), "r");
    let o = subdiff(&["regimes", "--resolution", "64", "--out", &out]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("r/regimes.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# subdiff "));
    assert_eq!(lines[1], "gamma,xi,label");
    assert_eq!(lines.len(), 2 + 64 * 64);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r/regimes.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["code_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn out_of_range_gamma_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "t: 6\n# model\ngamma: 2.5\n").unwrap();
    let o = subdiff(&["exact", "--config", cfg.to_str().unwrap(), "--out", &out_dir(dir.path(), "o")]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("gamma"), "{err}");
}

#[test]
fn unknown_key_and_bad_flag_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "t = 6\nsweep = 10\n").unwrap();
    let o = subdiff(&["exact", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    assert_eq!(subdiff(&["exact", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = subdiff(&["sample", "--t", "2", "--n-per-unit", "1", "--sweeps", "150", "--burn-in", "100", "--chains", "1", "--out", &out_dir(dir.path(), "o")]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = out_dir(dir.path(), name);
        let o = subdiff(&[
            "sample", "--t", "3", "--n-per-unit", "2", "--sweeps", "3000", "--burn-in", "300",
            "--chains", "2", "--seed", "17", "--boundary", "periodic", "--out", &out,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read_to_string(dir.path().join(name).join("sample.csv")).unwrap(),
            fs::read_to_string(dir.path().join(name).join("sample.json")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "subcommand: exact\nt: 4\nboundary: periodic\nalpha: 0\n").unwrap();
    let out = out_dir(dir.path(), "o");
    assert!(subdiff(&["exact", "--config", cfg.to_str().unwrap(), "--t", "3", "--out", &out]).status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/exact.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["t"], 3);
    assert_eq!(manifest["config"]["boundary"], "periodic");
    let csv = fs::read_to_string(dir.path().join("o/exact.csv")).unwrap();
    // free periodic bridge: half the loop of T = 8 has variance T/4.
    let msd: f64 = csv.lines().find(|l| l.starts_with("msd,")).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((msd - 2.0).abs() < 1e-10, "{msd}");
}

#[test]
fn scaling_reports_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(dir.path(), "s");
    let o = subdiff(&["scaling", "--boundary", "periodic", "--xi", "2.5", "--t-values", "6,7,8,9,10", "--out", &out]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s/scaling.json")).unwrap()).unwrap();
    assert_eq!(v["within_band"], true);
    assert_eq!(v["subdiffusive"], true);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn verify_passes_with_per_check_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_dir(dir.path(), "v");
    let o = subdiff(&["verify", "--seed", "3", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v/verify.json")).unwrap()).unwrap();
    let checks = v["checks"].as_object().unwrap();
    assert!(checks.len() >= 9);
    assert!(checks.values().all(|c| c == true));
}

#[test]
fn recursion_outside_any_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = subdiff(&["recursion", "--gamma", "2", "--xi", "1", "--out", &out_dir(dir.path(), "o")]);
    assert_eq!(o.status.code(), Some(2));
}
