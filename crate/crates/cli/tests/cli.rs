use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn simulate(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .current_dir(dir)
        .env_remove("BDRIS_WORKERS")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn power_sweep_writes_one_file_per_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        &[
            "power-sweep",
            "--config",
            &config("power_sweep_qp40.json"),
            "--trials",
            "3",
            "--out",
            "power.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for name in [
        "power_ith0.01.csv",
        "power_ith0.1.csv",
        "power_ith0.01_summary.csv",
        "power_ith0.1_summary.csv",
    ] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
    let rows = std::fs::read_to_string(dir.path().join("power_ith0.1.csv")).unwrap();
    // header + 9 power levels × 2 architectures × 3 trials
    assert_eq!(rows.lines().count(), 1 + 9 * 2 * 3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = simulate(
            &[
                "ith-sweep",
                "--config",
                &config("ith_sweep.json"),
                "--trials",
                "2",
                "--seed",
                "9",
                "--out",
                name,
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let stem = name.trim_end_matches(".csv");
        files.push(std::fs::read(dir.path().join(format!("{stem}_ps30.csv"))).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn element_sweep_with_single_series_uses_plain_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        &[
            "element-sweep",
            "--config",
            &config("element_sweep.json"),
            "--trials",
            "1",
            "--arch",
            "d",
            "--out",
            "m.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("m_ith0.01.csv").exists());

    let cfg = dir.path().join("one.json");
    std::fs::write(
        &cfg,
        r#"{"sweep": "element_sweep", "sweep_values": [4, 8], "trials": 2, "fixed": {"i_th_list": [0.1]}}"#,
    )
    .unwrap();
    let out = simulate(
        &["element-sweep", "--config", cfg.to_str().unwrap(), "--out", "m.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert!(dir.path().join("m_summary.csv").exists());
}

#[test]
fn mismatched_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&["power-sweep", "--config", &config("ith_sweep.json")], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("IthSweep"), "{}", stderr(&out));
}

#[test]
fn missing_and_invalid_configs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&["power-sweep", "--config", "nope.json"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nope.json"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"sweep": "power_sweep", "sweep_values": [10, 5]}"#).unwrap();
    let out = simulate(&["power-sweep", "--config", bad.to_str().unwrap()], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("strictly increasing"), "{}", stderr(&out));
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        &[
            "power-sweep",
            "--trials",
            "1",
            "--arch",
            "d",
            "--out",
            "/nonexistent-dir/x.csv",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("/nonexistent-dir"), "{}", stderr(&out));
}

#[test]
fn bad_worker_count_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(["power-sweep", "--trials", "1", "--arch", "d"])
        .current_dir(dir.path())
        .env("BDRIS_WORKERS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("BDRIS_WORKERS"));
}

#[test]
fn single_dumps_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        &[
            "single",
            "--config",
            &config("ith_sweep.json"),
            "--trial",
            "4",
            "--p-max-dbm",
            "30",
            "--i-th",
            "0.1",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let dump: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let runs = dump.as_array().unwrap();
    assert_eq!(runs.len(), 2);
    let bd = &runs[0];
    assert_eq!(bd["architecture"], "BD");
    assert_eq!(bd["phi"].as_array().unwrap().len(), 32);
    let trace = bd["se_trace"].as_array().unwrap();
    assert_eq!(trace.last().unwrap(), &bd["se_bits"]);
    assert!(!bd["phase"].as_array().unwrap().is_empty());
    assert!(bd["interference_w"].as_f64().unwrap() <= 0.1 * (1.0 + 1e-9));

    let out = simulate(
        &[
            "single",
            "--arch",
            "d",
            "--gain-mode",
            "feed",
            "--power-rule",
            "kkt",
            "--out",
            "s.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let dump: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(dump[0]["architecture"], "D");
}

#[test]
fn bundled_configs_match_core_defaults() {
    use bdris_core::experiment::{ExperimentConfig, SweepKind};
    let ith: ExperimentConfig =
        serde_json::from_str(&std::fs::read_to_string(config("ith_sweep.json")).unwrap()).unwrap();
    assert_eq!(ith, ExperimentConfig::defaults_for(SweepKind::IthSweep));
    for name in ["power_sweep_qp40.json", "power_sweep_qp50.json", "element_sweep.json"] {
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(config(name)).unwrap()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.trials, 1000);
    }
}
