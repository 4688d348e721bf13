//! Harness surface tests: config round trips, output file contracts,
//! transfer evaluation flow, and the CLI entry points.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use dfw_lab::config::{ExperimentConfig, TransferConfig};
use dfw_lab::experiment::run_experiment;
use dfw_lab::presets;
use dfw_lab::transfer::run_transfer_eval;

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(tag);
    let _ = fs::remove_dir_all(&dir);
    dir
}

/// Small regression config shared by the I/O tests.
fn tiny_config(tag: &str) -> ExperimentConfig {
    let mut config = presets::preset("regression").unwrap();
    config.dims.d_x = Some(8);
    config.dims.d_y = Some(6);
    config.dims.r = Some(2);
    config.tasks = 3;
    config.samples_per_round = 30;
    config.iterations = 5;
    config.trials = 2;
    config.variants.truncate(2); // DFW-T25, DFW-T1
    config.variants[0].tasks = 3;
    config.variants[0].name = "DFW-T3".into();
    config.variants[1].tasks = 1;
    config.split_fraction = 0.4;
    config.master_seed = 77;
    config.output_dir = tmp_dir(tag).to_string_lossy().into_owned();
    config.transfer = Some(TransferConfig {
        variant: Some("DFW-T3".into()),
        finetune_sizes: vec![20, 40],
        trials: 6,
    });
    config
}

#[test]
fn experiment_writes_expected_files() {
    let config = tiny_config("io_files");
    let artifacts = run_experiment(&config).unwrap();
    // One CSV per variant x trial.
    assert_eq!(artifacts.csv_paths.len(), 4);
    for variant in ["DFW-T3", "DFW-T1"] {
        let mut rows = 0;
        for trial in 0..2 {
            let path = artifacts
                .output_dir
                .join(format!("{variant}_trial{trial}.csv"));
            let text = fs::read_to_string(&path).unwrap();
            let mut lines = text.lines();
            assert_eq!(
                lines.next().unwrap(),
                "variant,trial,iter,dist,contraction,r_inv_norm,noise_norm,wall_ms"
            );
            let body: Vec<&str> = lines.collect();
            rows += body.len();
            assert!(body[0].starts_with(&format!("{variant},{trial},0,")));
            // Representation file parses back into validated orthonormal rows.
            let rep_text = fs::read_to_string(
                artifacts
                    .output_dir
                    .join(format!("{variant}_trial{trial}_rep.json")),
            )
            .unwrap();
            let rep: dfw_core::linalg::OrthonormalRows =
                serde_json::from_str(&rep_text).unwrap();
            assert_eq!(rep.dim(), 8);
        }
        // Row count per variant = trials x iterations.
        assert_eq!(rows, config.trials * config.iterations);
    }
    assert!(artifacts.summary_path.exists());
    assert!(!artifacts.output_dir.join(".partial").exists());
}

#[test]
fn summary_records_paired_problem_hashes() {
    let config = tiny_config("io_summary");
    let artifacts = run_experiment(&config).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&artifacts.summary_path).unwrap()).unwrap();
    let trials = summary["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 2);
    let h0 = trials[0]["problem_hash"].as_str().unwrap();
    let h1 = trials[1]["problem_hash"].as_str().unwrap();
    assert_ne!(h0, h1, "distinct trials use distinct problems");
    // Regenerating the problem from the config reproduces the stored hash.
    let p0 = config
        .generate_problem(dfw_lab::experiment::problem_seed(config.master_seed, 0))
        .unwrap();
    assert_eq!(format!("{:016x}", p0.content_hash()), h0);

    let variants = summary["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 2);
    for v in variants {
        assert_eq!(v["dist_mean"].as_array().unwrap().len(), config.iterations);
        assert!(v["final_dist_mean"].as_f64().unwrap().is_finite());
    }
    // Config echo and seed are present.
    assert_eq!(summary["master_seed"].as_u64().unwrap(), 77);
    assert_eq!(summary["config"]["tasks"].as_u64().unwrap(), 3);
}

#[test]
fn transfer_eval_flow_and_missing_rep_error() {
    let config = tiny_config("io_transfer");
    // Before any run the representation files are missing: clean error.
    match run_transfer_eval(&config) {
        Err(dfw_lab::LabError::MissingRepresentation(path)) => {
            assert!(path.to_string_lossy().contains("DFW-T3_trial0_rep.json"));
        }
        other => panic!("expected missing representation error, got {other:?}"),
    }

    run_experiment(&config).unwrap();
    let csv_path = run_transfer_eval(&config).unwrap();
    let text = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "variant,n_prime,mean_param_error_sq,stderr_param_error_sq"
    );
    assert_eq!(lines.len(), 3); // header + one row per finetune size
    assert!(lines[1].starts_with("DFW-T3,20,"));
    assert!(lines[2].starts_with("DFW-T3,40,"));
}

#[test]
fn failing_run_leaves_partial_marker() {
    // Gradient split smaller than the covariate dimension: the whitened
    // round fails and the run must flag its outputs as partial.
    let mut config = tiny_config("io_partial");
    config.samples_per_round = 10;
    config.split_fraction = 0.5; // N2 = 5 < d_x = 8
    let err = run_experiment(&config).unwrap_err();
    assert!(err.to_string().contains("round 0"), "got: {err}");
    let marker = PathBuf::from(&config.output_dir).join(".partial");
    let text = fs::read_to_string(marker).unwrap();
    assert!(text.contains("singular sample covariance"), "marker: {text}");
}

#[test]
fn experiment_rerun_is_byte_identical() {
    let mut config = tiny_config("io_det_a");
    let a = run_experiment(&config).unwrap();
    let bytes_a: Vec<Vec<u8>> = a.csv_paths.iter().map(|p| fs::read(p).unwrap()).collect();
    config.output_dir = tmp_dir("io_det_b").to_string_lossy().into_owned();
    let b = run_experiment(&config).unwrap();
    let bytes_b: Vec<Vec<u8>> = b.csv_paths.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn cli_presets_and_error_paths() {
    let bin = env!("CARGO_BIN_EXE_dfw-lab");

    let out = Command::new(bin).arg("presets").output().unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for name in ["regression", "sysid", "imitation"] {
        assert!(doc.get(name).is_some(), "missing preset {name}");
    }

    let out = Command::new(bin)
        .args(["presets", "regression"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let config: ExperimentConfig =
        ExperimentConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(config.tasks, 25);

    // Unknown subcommand and missing config exit nonzero.
    let out = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(bin)
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_run_and_transfer_roundtrip() {
    let bin = env!("CARGO_BIN_EXE_dfw-lab");
    let dir = tmp_dir("io_cli_run");
    fs::create_dir_all(&dir).unwrap();
    let mut config = tiny_config("io_cli_out");
    config.iterations = 3;
    let config_path = dir.join("config.json");
    fs::write(&config_path, config.to_json()).unwrap();

    let out = Command::new(bin)
        .args(["run", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = Command::new(bin)
        .args(["transfer", "--config", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "transfer failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(PathBuf::from(&config.output_dir).join("transfer.csv").exists());
}
