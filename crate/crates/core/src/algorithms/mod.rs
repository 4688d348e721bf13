//! Optimization procedures: representation-conditioned least squares, the
//! de-biased feature-whitened update, the vanilla alternating
//! minimization-descent baseline, the training loop, the sample-budget
//! scheduler, and transfer fine-tuning.

mod schedule;
mod steps;
mod training;

pub use schedule::{erm_schedule, ErmSchedule};
pub use steps::{
    amd_step, dfw_step, least_squares_weights, least_squares_weights_ridge, task_rep_gradient,
    StepOutput,
};
pub use training::{init_representation, run_training, transfer_finetune, TransferFit, TrainingRun};

use serde::{Deserialize, Serialize};

use crate::datasim::SplitKind;
use crate::error::{Error, Result};

/// Which update rule drives the representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// De-biased and feature-whitened update: weights from one data split,
    /// whitened gradient from the disjoint split.
    Dfw,
    /// Plain alternating minimization-descent: weights and raw gradient both
    /// fit on the full batch. This is exactly the biased scheme the de-biased
    /// update corrects.
    VanillaAmd,
}

/// Step-size policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    Fixed(f64),
    /// eta = 0.956 / lambda_max of the task-averaged weight Gram, computed
    /// from ground truth. Matches the largest step size the contraction
    /// analysis permits; useful for theory-facing tests.
    OracleContraction,
}

/// How the initial representation estimate is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Rotate the true representation in the ambient space by a seeded
    /// rotation of scale gamma, then re-orthonormalize. gamma = 0 starts at
    /// the truth exactly.
    RandomRotationOfTruth { gamma: f64 },
    /// Fresh random orthonormal rows, ignoring the truth.
    Random,
}

/// Full configuration of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub variant: Variant,
    pub step_size: StepSize,
    /// Fraction of each round's samples assigned to the weight fit.
    pub split_fraction: f64,
    pub iterations: usize,
    /// Fresh samples per task per round.
    pub batch_size: usize,
    /// Per-round batch sizes, e.g. from [`erm_schedule`]. When set it
    /// overrides `batch_size` and `iterations` follows its length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_schedule: Option<Vec<usize>>,
    pub init: InitMode,
    /// Allow a tiny ridge on a singular sample covariance instead of
    /// aborting. Off by default: a singular covariance means the round had
    /// fewer gradient samples than covariate dimensions, which the theory
    /// explicitly excludes.
    pub ridge_fallback: bool,
    pub split_kind: SplitKind,
}

impl AlgoConfig {
    pub fn new(variant: Variant, step_size: f64, batch_size: usize, iterations: usize) -> Self {
        AlgoConfig {
            variant,
            step_size: StepSize::Fixed(step_size),
            split_fraction: 0.5,
            iterations,
            batch_size,
            batch_schedule: None,
            init: InitMode::RandomRotationOfTruth { gamma: 1.0 },
            ridge_fallback: false,
            split_kind: SplitKind::Contiguous,
        }
    }

    /// Number of rounds to run and the batch size of round `k`.
    pub fn rounds(&self) -> usize {
        self.batch_schedule
            .as_ref()
            .map_or(self.iterations, Vec::len)
    }

    pub fn round_batch_size(&self, round: usize) -> usize {
        self.batch_schedule
            .as_ref()
            .map_or(self.batch_size, |s| s[round])
    }

    /// Whitening is inseparable from the de-biased variant.
    pub fn whitening(&self) -> bool {
        matches!(self.variant, Variant::Dfw)
    }

    /// De-biasing (disjoint weight/gradient data) likewise.
    pub fn debias(&self) -> bool {
        matches!(self.variant, Variant::Dfw)
    }

    pub fn validate(&self) -> Result<()> {
        if let StepSize::Fixed(eta) = self.step_size {
            if !eta.is_finite() || eta <= 0.0 {
                return Err(Error::InvalidInput("step size must be positive".into()));
            }
        }
        if self.rounds() == 0 {
            return Err(Error::InvalidInput("need at least one iteration".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::InvalidInput("batch size must be at least 2".into()));
        }
        if let Some(schedule) = &self.batch_schedule {
            if schedule.iter().any(|&n| n < 2) {
                return Err(Error::InvalidInput(
                    "scheduled batch sizes must be at least 2".into(),
                ));
            }
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidInput("split fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics emitted by the training loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Subspace distance to the true representation, when ground truth is
    /// available.
    pub dist: Option<f64>,
    /// ||I - (eta/T) sum_t F(t)^T F(t)|| for the weights of this round.
    pub contraction_factor: f64,
    /// ||R^{-1}|| for the orthonormalization factor of this round.
    pub orthogonalization_inverse_norm: f64,
    /// Norm of the task-averaged gradient noise term; available only in
    /// simulation where the realized label noise is known.
    pub noise_term_norm: Option<f64>,
    /// Spectral norm of each task's fitted weights.
    pub weight_norms: Vec<f64>,
    /// Wall-clock time of the round. Diagnostic only; deterministic outputs
    /// never include it.
    pub wall_ms: f64,
}
