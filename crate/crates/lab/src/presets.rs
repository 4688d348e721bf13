//! The three stock experiment configurations.

use crate::config::{
    Algorithm, DimsConfig, ExperimentConfig, Setting, TransferConfig, VariantSpec,
};

fn variant(name: &str, algorithm: Algorithm, tasks: usize, step_size: Option<f64>) -> VariantSpec {
    VariantSpec {
        name: name.to_string(),
        algorithm,
        tasks,
        step_size,
    }
}

/// iid non-isotropic regression: d_x = d_y = 50, r = 7, T = 25, N = 100,
/// eta = 7.5e-3 for both updates, plus the slow-step baseline at 7.5e-5.
///
/// The weight fit only needs a handful of samples per latent direction, so
/// the split favors the gradient side: N2 = 75 keeps the whitened sample
/// covariance comfortably away from the N2 = d_x singular edge.
pub fn regression() -> ExperimentConfig {
    ExperimentConfig {
        setting: Setting::Regression,
        dims: DimsConfig {
            d_x: Some(50),
            d_y: Some(50),
            r: Some(7),
            ..Default::default()
        },
        tasks: 25,
        samples_per_round: 100,
        iterations: 150,
        step_size: 7.5e-3,
        variants: vec![
            variant("DFW-T25", Algorithm::Dfw, 25, None),
            variant("DFW-T1", Algorithm::Dfw, 1, None),
            variant("AMD-T25", Algorithm::Amd, 25, None),
            variant("AMD-T25-slow", Algorithm::Amd, 25, Some(7.5e-5)),
        ],
        trials: 10,
        master_seed: 1,
        split_fraction: 0.25,
        output_dir: "out/regression".into(),
        noise_std: 1.0,
        rotation_scale: 0.01,
        input_std: 1.0,
        proc_noise_offset: 5.0,
        cost_alphas: None,
        init_gamma: 1.0,
        erm_schedule: None,
        transfer: Some(TransferConfig {
            variant: Some("DFW-T25".into()),
            finetune_sizes: vec![100, 400, 1600],
            trials: 20,
        }),
    }
}

/// Linear system identification: state dimension 25, control dimension 2,
/// r = 6, N = 100, sigma_u^2 = 1; eta = 1e-1 for the whitened update and
/// 2e-3 for the baseline.
pub fn sysid() -> ExperimentConfig {
    ExperimentConfig {
        setting: Setting::SysId,
        dims: DimsConfig {
            d_x: Some(25),
            d_u: Some(2),
            r: Some(6),
            ..Default::default()
        },
        tasks: 25,
        samples_per_round: 100,
        iterations: 150,
        step_size: 1e-1,
        variants: vec![
            variant("DFW-T25", Algorithm::Dfw, 25, None),
            variant("DFW-T1", Algorithm::Dfw, 1, None),
            variant("AMD-T25", Algorithm::Amd, 25, Some(2e-3)),
        ],
        trials: 10,
        master_seed: 2,
        split_fraction: 0.5,
        output_dir: "out/sysid".into(),
        noise_std: 1.0,
        rotation_scale: 0.01,
        input_std: 1.0,
        proc_noise_offset: 5.0,
        cost_alphas: None,
        init_gamma: 1.0,
        erm_schedule: None,
        transfer: None,
    }
}

/// LQR imitation learning: 4 states, 4 inputs, 25-dimensional observations,
/// N = 75, expert costs alpha in logspace(0, 3, T + 1), R = I/4.
pub fn imitation() -> ExperimentConfig {
    ExperimentConfig {
        setting: Setting::Imitation,
        dims: DimsConfig {
            n_x: Some(4),
            n_u: Some(4),
            obs_dim: Some(25),
            ..Default::default()
        },
        tasks: 25,
        samples_per_round: 75,
        iterations: 150,
        step_size: 5e-2,
        variants: vec![
            variant("DFW-T25", Algorithm::Dfw, 25, None),
            variant("DFW-T1", Algorithm::Dfw, 1, None),
            variant("AMD-T25", Algorithm::Amd, 25, Some(2e-3)),
        ],
        trials: 10,
        master_seed: 3,
        split_fraction: 0.3334,
        output_dir: "out/imitation".into(),
        noise_std: 1.0,
        rotation_scale: 0.01,
        input_std: 1.0,
        proc_noise_offset: 5.0,
        cost_alphas: None,
        init_gamma: 1.0,
        erm_schedule: None,
        transfer: None,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["regression", "sysid", "imitation"];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "regression" => Some(regression()),
        "sysid" => Some(sysid()),
        "imitation" => Some(imitation()),
        _ => None,
    }
}

/// All presets as one JSON object keyed by preset name.
pub fn presets_document() -> String {
    let mut map = serde_json::Map::new();
    for name in PRESET_NAMES {
        let config = preset(name).expect("known preset");
        let value = serde_json::to_value(&config).expect("preset serialization");
        map.insert(name.to_string(), value);
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("document serialization")
}
