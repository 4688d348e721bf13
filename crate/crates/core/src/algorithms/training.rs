//! Initialization, the multi-round training loop, and transfer fine-tuning.

use std::time::Instant;

use crate::algorithms::steps::{amd_step, dfw_step, least_squares_weights};
use crate::algorithms::{AlgoConfig, InitMode, IterationRecord, StepOutput, StepSize, Variant};
use crate::datasim::{sample_batch_with, TaskSample};
use crate::error::Result;
use crate::linalg::{orthonormalize_rows, random_rotation, Matrix, OrthonormalRows};
use crate::metrics::{diversity_stats, DistanceOracle};
use crate::rng::DetRng;
use crate::taskgen::{gen_shared_representation, MultiTaskProblem};

const INIT_STREAM: u64 = 0;
const ROUND_STREAM_BASE: u64 = 1;

/// Initial representation estimate.
pub fn init_representation(
    problem: &MultiTaskProblem,
    mode: InitMode,
    seed: u64,
) -> Result<OrthonormalRows> {
    match mode {
        InitMode::RandomRotationOfTruth { gamma } => {
            let d = problem.dims.d_x;
            let rot = random_rotation(d, gamma, seed);
            let rotated = problem.truth.phi_star.mat().matmul(&rot);
            let (q, _) = orthonormalize_rows(&rotated)?;
            Ok(q)
        }
        InitMode::Random => gen_shared_representation(problem.dims.d_x, problem.dims.r, seed),
    }
}

/// Records and final state of one training run.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub records: Vec<IterationRecord>,
    pub final_rep: OrthonormalRows,
    pub initial_distance: f64,
}

impl TrainingRun {
    pub fn final_distance(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.dist)
    }
}

/// Resolve the configured step size against the problem's ground truth.
pub fn resolve_step_size(problem: &MultiTaskProblem, step_size: StepSize) -> f64 {
    match step_size {
        StepSize::Fixed(eta) => eta,
        StepSize::OracleContraction => {
            let stats = diversity_stats(&problem.truth.f_star);
            0.956 / stats.lambda_f_max
        }
    }
}

/// Run the configured variant for `config.iterations` rounds, sampling a
/// fresh batch per round from round-distinct sub-streams of `seed`.
pub fn run_training(
    problem: &MultiTaskProblem,
    config: &AlgoConfig,
    seed: u64,
) -> Result<TrainingRun> {
    config.validate()?;
    let root = DetRng::new(seed);
    let oracle = DistanceOracle::new(&problem.truth.phi_star)?;
    let mut rep = init_representation(problem, config.init, root.split(INIT_STREAM).next_u64())?;
    let initial_distance = oracle.distance_to(&rep);
    let eta = resolve_step_size(problem, config.step_size);

    let rounds = config.rounds();
    let mut records = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let started = Instant::now();
        let round_seed = root.split(ROUND_STREAM_BASE + round as u64).next_u64();
        let batch = sample_batch_with(
            problem,
            config.round_batch_size(round),
            config.split_fraction,
            config.split_kind,
            round_seed,
        )
        .map_err(|e| e.in_round(round))?;

        let StepOutput {
            rep: next,
            r_factor: _,
            mut record,
        } = match config.variant {
            Variant::Dfw => dfw_step(&batch, &rep, eta, Some(&oracle), config.ridge_fallback),
            Variant::VanillaAmd => amd_step(&batch, &rep, eta, Some(&oracle)),
        }
        .map_err(|e| e.in_round(round))?;

        record.iter = round;
        record.wall_ms = started.elapsed().as_secs_f64() * 1e3;
        records.push(record);
        rep = next;
    }

    Ok(TrainingRun {
        records,
        final_rep: rep,
        initial_distance,
    })
}

/// Least-squares fit of a new task's weights on a frozen representation.
#[derive(Debug, Clone)]
pub struct TransferFit {
    pub weights: Matrix,
    /// Frobenius error ||F rep - M*|| when the true operator is supplied.
    pub param_error: Option<f64>,
}

pub fn transfer_finetune(
    rep: &OrthonormalRows,
    data: &TaskSample,
    truth_operator: Option<&Matrix>,
) -> Result<TransferFit> {
    let weights = least_squares_weights(&data.labels, &data.covariates, rep)?;
    let param_error = truth_operator.map(|m| (&weights.matmul(rep.mat()) - m).frobenius_norm());
    Ok(TransferFit {
        weights,
        param_error,
    })
}
