//! End-to-end checks of the `ndft-sim` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndft_sim::experiment::{run_experiment, summary_csv, ExperimentConfig, RunOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ndft-sim"))
}

fn shipped_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, toml::to_string(cfg).unwrap()).unwrap();
    path
}

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::shipped();
    cfg.scenarios.retain(|s| s.n_atoms == 16);
    cfg
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_config_file_validates_and_equals_builtin() {
    let o = bin().arg("validate").arg(shipped_config()).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(shipped_config()).unwrap();
    let parsed: ExperimentConfig = toml::from_str(&text).unwrap();
    assert_eq!(parsed, ExperimentConfig::shipped());
}

#[test]
fn zero_bus_width_exits_2_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.machine.hbm.bus_width_bits = 0;
    let path = write_config(dir.path(), &cfg);
    for cmd in ["validate", "run"] {
        let o = bin().arg(cmd).arg(&path).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        let all = format!("{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
        assert!(all.contains("machine.hbm.bus_width_bits"), "{all}");
    }
}

#[test]
fn missing_syevd_byte_coef_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: toml::Table = toml::to_string(&small_config()).unwrap().parse().unwrap();
    doc["workload"]["syevd"].as_table_mut().unwrap().remove("byte_coef");
    let path = dir.path().join("c.toml");
    fs::write(&path, toml::to_string(&doc).unwrap()).unwrap();
    let o = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("workload.syevd.byte_coef"));
}

#[test]
fn empty_scenarios_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.scenarios.clear();
    let o = bin().arg("run").arg(write_config(dir.path(), &cfg)).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unreadable_file_is_an_io_error() {
    let o = bin().arg("validate").arg("/nonexistent/config.toml").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn capacity_error_exits_3_naming_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.scenarios.retain(|s| s.policy == ndft_sim::scheduler::Policy::NdpOnly);
    cfg.scenarios[0].n_atoms = 64;
    cfg.scenarios[0].name = Some("too_big".into());
    let o = bin().arg("run").arg(write_config(dir.path(), &cfg)).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("too_big"));
}

#[test]
fn run_writes_reports_matching_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let path = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let o = bin()
        .args(["run", path.to_str().unwrap(), "--timeline", "--out", out.to_str().unwrap()])
        .env_remove("NDFT_SIM_SEED")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read(out.join("summary.csv")).unwrap();
    let lib = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(summary, summary_csv(&lib.summary).unwrap());
    let header = String::from_utf8_lossy(&summary).lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "n_atoms,policy,pseudo_mode,makespan_s,speedup_vs_cpu_only,overhead_frac,footprint_bytes,inter_stack_bytes"
    );
    for sc in &cfg.scenarios {
        for kind in ["report", "schedule", "timeline"] {
            assert!(out.join(format!("{kind}_{}.csv", sc.label())).exists(), "{kind} {}", sc.label());
        }
    }
    assert!(out.join("classification.csv").exists());
    assert!(fs::read_dir(&out).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn scenario_filter_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let path = write_config(dir.path(), &cfg);
    let label = cfg.scenarios[0].label();
    let run = |seed: &str, out: &str| {
        let o = bin()
            .args(["run", path.to_str().unwrap(), "--scenario", &label, "--exec-pseudo", "--out"])
            .arg(dir.path().join(out))
            .env("NDFT_SIM_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(dir.path().join(out).join("summary.csv")).unwrap()
    };
    let a = run("7", "a");
    assert_eq!(a.lines().count(), 2);
    assert_eq!(a, run("7", "b"));
    let o = bin()
        .args(["run", path.to_str().unwrap(), "--scenario", "nope"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["run", path.to_str().unwrap(), "--scenario", &label])
        .env("NDFT_SIM_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
