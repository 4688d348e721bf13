//! Experiment configuration: JSON documents mirroring the field names below
//! in snake_case, one file per experiment.

use serde::{Deserialize, Serialize};

use dfw_core::taskgen::{
    gen_imitation_problem, gen_regression_problem, gen_sysid_problem, logspace, MultiTaskProblem,
};

use crate::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Regression,
    #[serde(rename = "sysid")]
    SysId,
    Imitation,
}

/// Dimension block; which fields are required depends on the setting.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DimsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_y: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_u: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_u: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obs_dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dfw,
    Amd,
}

/// One curve of the experiment: an algorithm at a task count, optionally
/// with its own step size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    pub algorithm: Algorithm,
    pub tasks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErmScheduleConfig {
    pub total_samples: u64,
    pub contraction: f64,
    pub noise_constant: f64,
    pub initial_distance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferConfig {
    /// Variant whose final representations are fine-tuned; defaults to the
    /// first variant in the list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Fine-tuning dataset sizes N'.
    pub finetune_sizes: Vec<usize>,
    #[serde(default = "default_transfer_trials")]
    pub trials: usize,
}

fn default_transfer_trials() -> usize {
    20
}

fn default_split_fraction() -> f64 {
    0.5
}

fn default_noise_std() -> f64 {
    1.0
}

fn default_rotation_scale() -> f64 {
    0.01
}

fn default_input_std() -> f64 {
    1.0
}

fn default_proc_noise_offset() -> f64 {
    5.0
}

fn default_init_gamma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub dims: DimsConfig,
    /// Task count of the generated problem; variants may use any prefix.
    pub tasks: usize,
    /// Fresh samples per task per optimization round.
    pub samples_per_round: usize,
    pub iterations: usize,
    /// Default step size; variants may override.
    pub step_size: f64,
    pub variants: Vec<VariantSpec>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    pub output_dir: String,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default = "default_rotation_scale")]
    pub rotation_scale: f64,
    #[serde(default = "default_input_std")]
    pub input_std: f64,
    #[serde(default = "default_proc_noise_offset")]
    pub proc_noise_offset: f64,
    /// Imitation cost weights (tasks + 1 entries); defaults to
    /// logspace(0, 3, tasks + 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_alphas: Option<Vec<f64>>,
    /// Scale of the rotation applied to the truth for initialization.
    #[serde(default = "default_init_gamma")]
    pub init_gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erm_schedule: Option<ErmScheduleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> LabResult<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| LabError::Json(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> LabResult<()> {
        if self.variants.is_empty() {
            return Err(LabError::Config("variant list is empty".into()));
        }
        if self.tasks == 0 || self.trials == 0 || self.iterations == 0 {
            return Err(LabError::Config(
                "tasks, trials, and iterations must be positive".into(),
            ));
        }
        if self.samples_per_round < 2 {
            return Err(LabError::Config("samples_per_round must be at least 2".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(LabError::Config("split_fraction must lie in (0, 1)".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for v in &self.variants {
            if v.tasks == 0 || v.tasks > self.tasks {
                return Err(LabError::Config(format!(
                    "variant {} uses {} tasks but the problem has {}",
                    v.name, v.tasks, self.tasks
                )));
            }
            if v.name.is_empty() || v.name.contains(['/', '\\']) || v.name.contains(char::is_whitespace) {
                return Err(LabError::Config(format!(
                    "variant name {:?} must be a nonempty token usable in file names",
                    v.name
                )));
            }
            if !seen.insert(v.name.clone()) {
                return Err(LabError::Config(format!("duplicate variant name {}", v.name)));
            }
            if let Some(eta) = v.step_size {
                if !eta.is_finite() || eta <= 0.0 {
                    return Err(LabError::Config(format!(
                        "variant {} has non-positive step size",
                        v.name
                    )));
                }
            }
        }
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return Err(LabError::Config("step_size must be positive".into()));
        }
        self.require_dims()?;
        if let Some(alphas) = &self.cost_alphas {
            if alphas.len() != self.tasks + 1 {
                return Err(LabError::Config(format!(
                    "cost_alphas needs tasks + 1 = {} entries, got {}",
                    self.tasks + 1,
                    alphas.len()
                )));
            }
        }
        if let Some(t) = &self.transfer {
            if t.finetune_sizes.is_empty() || t.trials == 0 {
                return Err(LabError::Config(
                    "transfer block needs finetune sizes and a positive trial count".into(),
                ));
            }
            if let Some(name) = &t.variant {
                if !self.variants.iter().any(|v| &v.name == name) {
                    return Err(LabError::Config(format!(
                        "transfer variant {name} is not in the variant list"
                    )));
                }
            }
        }
        Ok(())
    }

    fn require_dims(&self) -> LabResult<()> {
        let missing = |what: &str| LabError::Config(format!("dims.{what} required for {:?}", self.setting));
        match self.setting {
            Setting::Regression => {
                self.dims.d_x.ok_or_else(|| missing("d_x"))?;
                self.dims.d_y.ok_or_else(|| missing("d_y"))?;
                self.dims.r.ok_or_else(|| missing("r"))?;
            }
            Setting::SysId => {
                self.dims.d_x.ok_or_else(|| missing("d_x"))?;
                self.dims.d_u.ok_or_else(|| missing("d_u"))?;
                self.dims.r.ok_or_else(|| missing("r"))?;
            }
            Setting::Imitation => {
                self.dims.n_x.ok_or_else(|| missing("n_x"))?;
                self.dims.n_u.ok_or_else(|| missing("n_u"))?;
                self.dims.obs_dim.ok_or_else(|| missing("obs_dim"))?;
            }
        }
        Ok(())
    }

    /// Ground-truth instance for one trial; shared by every variant of the
    /// trial so comparisons are paired.
    pub fn generate_problem(&self, seed: u64) -> LabResult<MultiTaskProblem> {
        let p = match self.setting {
            Setting::Regression => gen_regression_problem(
                self.dims.d_x.unwrap(),
                self.dims.d_y.unwrap(),
                self.dims.r.unwrap(),
                self.tasks,
                self.noise_std,
                self.rotation_scale,
                seed,
            )?,
            Setting::SysId => gen_sysid_problem(
                self.dims.d_x.unwrap(),
                self.dims.d_u.unwrap(),
                self.dims.r.unwrap(),
                self.tasks,
                self.input_std,
                self.proc_noise_offset,
                seed,
            )?,
            Setting::Imitation => {
                let alphas = self
                    .cost_alphas
                    .clone()
                    .unwrap_or_else(|| logspace(0.0, 3.0, self.tasks + 1));
                gen_imitation_problem(
                    self.dims.n_x.unwrap(),
                    self.dims.n_u.unwrap(),
                    self.dims.obs_dim.unwrap(),
                    self.tasks,
                    &alphas,
                    seed,
                )?
            }
        };
        Ok(p)
    }

    pub fn transfer_variant(&self) -> LabResult<&VariantSpec> {
        let transfer = self
            .transfer
            .as_ref()
            .ok_or_else(|| LabError::Config("config has no transfer block".into()))?;
        match &transfer.variant {
            Some(name) => self
                .variants
                .iter()
                .find(|v| &v.name == name)
                .ok_or_else(|| LabError::Config(format!("unknown transfer variant {name}"))),
            None => Ok(&self.variants[0]),
        }
    }
}
