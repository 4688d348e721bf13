//! Seeded multi-trial experiment runner.
//!
//! Every variant of a trial consumes the identical ground-truth problem
//! (smaller task counts use a prefix of its tasks), training seeds derive
//! from (master seed, variant, trial), and all workers produce bitwise
//! identical records regardless of scheduling, so CSV outputs are
//! byte-reproducible for a fixed config and master seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use dfw_core::algorithms::{
    run_training, AlgoConfig, InitMode, IterationRecord, StepSize, Variant,
};
use dfw_core::datasim::SplitKind;
use dfw_core::linalg::OrthonormalRows;
use dfw_core::rng::DetRng;
use dfw_core::taskgen::MultiTaskProblem;

use crate::config::{Algorithm, ExperimentConfig, VariantSpec};
use crate::csvio;
use crate::{LabError, LabResult};

pub const THREADS_ENV: &str = "DFW_LAB_THREADS";

const PROBLEM_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
pub(crate) const TRANSFER_STREAM: u64 = 3;

/// Seed from which trial `trial`'s ground-truth problem derives; exposed so
/// callers can regenerate the exact instance of a finished run.
pub fn problem_seed(master_seed: u64, trial: usize) -> u64 {
    DetRng::new(master_seed)
        .split(PROBLEM_STREAM)
        .split(trial as u64)
        .next_u64()
}

fn train_seed(master_seed: u64, variant_idx: usize, trial: usize) -> u64 {
    DetRng::new(master_seed)
        .split(TRAIN_STREAM)
        .split(variant_idx as u64)
        .split(trial as u64)
        .next_u64()
}

pub(crate) fn rep_path(dir: &Path, variant: &str, trial: usize) -> PathBuf {
    dir.join(format!("{variant}_trial{trial}_rep.json"))
}

fn csv_path(dir: &Path, variant: &str, trial: usize) -> PathBuf {
    dir.join(format!("{variant}_trial{trial}.csv"))
}

fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .map(|n| n.clamp(1, 64))
        .unwrap_or(1)
}

pub(crate) fn algo_config(config: &ExperimentConfig, variant: &VariantSpec) -> AlgoConfig {
    AlgoConfig {
        variant: match variant.algorithm {
            Algorithm::Dfw => Variant::Dfw,
            Algorithm::Amd => Variant::VanillaAmd,
        },
        step_size: StepSize::Fixed(variant.step_size.unwrap_or(config.step_size)),
        split_fraction: config.split_fraction,
        iterations: config.iterations,
        batch_size: config.samples_per_round,
        batch_schedule: None,
        init: InitMode::RandomRotationOfTruth {
            gamma: config.init_gamma,
        },
        ridge_fallback: false,
        split_kind: SplitKind::Contiguous,
    }
}

struct JobOutput {
    variant_idx: usize,
    trial: usize,
    records: Vec<IterationRecord>,
    final_rep: OrthonormalRows,
}

#[derive(Debug, Clone, Serialize)]
struct TrialSummary {
    trial: usize,
    problem_hash: String,
}

#[derive(Debug, Clone, Serialize)]
struct VariantSummary {
    name: String,
    algorithm: Algorithm,
    tasks: usize,
    step_size: f64,
    final_dist_mean: f64,
    final_dist_stderr: f64,
    /// Mean subspace distance per iteration over trials.
    dist_mean: Vec<f64>,
    /// 95% band: mean -/+ 1.96 stderr.
    dist_band_lo: Vec<f64>,
    dist_band_hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Metadata {
    timestamp_unix_ms: u128,
    total_wall_ms: f64,
    workers: usize,
}

/// Echo of the sample-budget schedule when the config requests one.
#[derive(Debug, Clone, Serialize)]
struct ErmScheduleSummary {
    rounds: usize,
    block_sizes: Vec<u64>,
    final_bound: f64,
    simulated_final: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Summary {
    config: ExperimentConfig,
    master_seed: u64,
    trials: Vec<TrialSummary>,
    variants: Vec<VariantSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    erm_schedule: Option<ErmScheduleSummary>,
    metadata: Metadata,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub csv_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> LabResult<()> {
    fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

fn mark_partial(dir: &Path, message: &str) {
    // Best effort: the marker must not mask the original error.
    let _ = fs::write(dir.join(".partial"), message);
}

/// Run every variant x trial job and write per-job CSV and representation
/// files plus an aggregate summary.json.
pub fn run_experiment(config: &ExperimentConfig) -> LabResult<RunArtifacts> {
    config.validate()?;
    warn_if_gradient_split_small(config);
    let started = Instant::now();
    let dir = PathBuf::from(&config.output_dir);
    fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;

    // One ground-truth problem per trial, shared across variants.
    let mut problems = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let problem = config
            .generate_problem(problem_seed(config.master_seed, trial))
            .map_err(|e| {
                mark_partial(&dir, &format!("problem generation failed at trial {trial}: {e}"));
                e
            })?;
        problems.push(problem);
    }

    let jobs: Vec<(usize, usize)> = (0..config.variants.len())
        .flat_map(|v| (0..config.trials).map(move |j| (v, j)))
        .collect();
    let workers = worker_count().min(jobs.len().max(1));
    let results = run_jobs(config, &problems, &jobs, workers);

    let mut outputs: Vec<JobOutput> = Vec::with_capacity(jobs.len());
    for result in results {
        match result {
            Ok(output) => outputs.push(output),
            Err(e) => {
                mark_partial(&dir, &e.to_string());
                flush_outputs(&dir, config, &outputs)?;
                return Err(e);
            }
        }
    }
    outputs.sort_by_key(|o| (o.variant_idx, o.trial));
    let csv_paths = flush_outputs(&dir, config, &outputs)?;

    let summary = build_summary(config, &problems, &outputs, workers, started);
    let summary_path = dir.join("summary.json");
    write_file(
        &summary_path,
        &serde_json::to_string_pretty(&summary).map_err(|e| LabError::Json(e.to_string()))?,
    )?;

    Ok(RunArtifacts {
        output_dir: dir,
        csv_paths,
        summary_path,
    })
}

/// The whitened update inverts a d x d covariance built from the gradient
/// split; fewer than d samples there cannot work, and barely more than d
/// amplifies noise badly. Warn rather than fail: the round itself reports
/// the hard error if it comes to that.
fn warn_if_gradient_split_small(config: &ExperimentConfig) {
    let d_cov = match config.setting {
        crate::config::Setting::Regression => config.dims.d_x.unwrap_or(0),
        crate::config::Setting::SysId => {
            config.dims.d_x.unwrap_or(0) + config.dims.d_u.unwrap_or(0)
        }
        crate::config::Setting::Imitation => config.dims.obs_dim.unwrap_or(0),
    };
    let n1 = (config.split_fraction * config.samples_per_round as f64).ceil() as usize;
    let n2 = config.samples_per_round.saturating_sub(n1);
    let whitened = config
        .variants
        .iter()
        .any(|v| matches!(v.algorithm, Algorithm::Dfw));
    if whitened && n2 < d_cov {
        eprintln!(
            "warning: gradient split has {n2} samples for a {d_cov}-dimensional covariate \
             covariance; whitened rounds will fail (raise samples_per_round or lower split_fraction)"
        );
    }
}

fn run_jobs(
    config: &ExperimentConfig,
    problems: &[MultiTaskProblem],
    jobs: &[(usize, usize)],
    workers: usize,
) -> Vec<LabResult<JobOutput>> {
    let run_one = |&(variant_idx, trial): &(usize, usize)| -> LabResult<JobOutput> {
        let variant = &config.variants[variant_idx];
        let problem = problems[trial].subset_tasks(variant.tasks);
        let algo = algo_config(config, variant);
        let seed = train_seed(config.master_seed, variant_idx, trial);
        let run = run_training(&problem, &algo, seed)?;
        Ok(JobOutput {
            variant_idx,
            trial,
            records: run.records,
            final_rep: run.final_rep,
        })
    };

    if workers <= 1 {
        return jobs.iter().map(run_one).collect();
    }

    let next_job = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<LabResult<JobOutput>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next_job.fetch_add(1, Ordering::Relaxed);
                if idx >= jobs.len() {
                    break;
                }
                let result = run_one(&jobs[idx]);
                slots.lock().expect("job slots poisoned")[idx] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("job slots poisoned")
        .into_iter()
        .map(|slot| slot.expect("every job produced a result"))
        .collect()
}

fn flush_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    outputs: &[JobOutput],
) -> LabResult<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(outputs.len());
    for output in outputs {
        let name = &config.variants[output.variant_idx].name;
        let csv = csv_path(dir, name, output.trial);
        write_file(&csv, &csvio::records_csv(name, output.trial, &output.records))?;
        let rep_json = serde_json::to_string(&output.final_rep)
            .map_err(|e| LabError::Json(e.to_string()))?;
        write_file(&rep_path(dir, name, output.trial), &rep_json)?;
        paths.push(csv);
    }
    Ok(paths)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn build_summary(
    config: &ExperimentConfig,
    problems: &[MultiTaskProblem],
    outputs: &[JobOutput],
    workers: usize,
    started: Instant,
) -> Summary {
    let trials = problems
        .iter()
        .enumerate()
        .map(|(trial, p)| TrialSummary {
            trial,
            problem_hash: format!("{:016x}", p.content_hash()),
        })
        .collect();

    let mut variants = Vec::with_capacity(config.variants.len());
    for (variant_idx, spec) in config.variants.iter().enumerate() {
        let runs: Vec<&JobOutput> = outputs
            .iter()
            .filter(|o| o.variant_idx == variant_idx)
            .collect();
        let iters = config.iterations;
        let mut dist_mean = Vec::with_capacity(iters);
        let mut lo = Vec::with_capacity(iters);
        let mut hi = Vec::with_capacity(iters);
        for k in 0..iters {
            let values: Vec<f64> = runs
                .iter()
                .filter_map(|o| o.records.get(k).and_then(|r| r.dist))
                .collect();
            let (m, se) = mean_and_stderr(&values);
            dist_mean.push(m);
            lo.push(m - 1.96 * se);
            hi.push(m + 1.96 * se);
        }
        let finals: Vec<f64> = runs
            .iter()
            .filter_map(|o| o.records.last().and_then(|r| r.dist))
            .collect();
        let (final_mean, final_se) = mean_and_stderr(&finals);
        variants.push(VariantSummary {
            name: spec.name.clone(),
            algorithm: spec.algorithm,
            tasks: spec.tasks,
            step_size: spec.step_size.unwrap_or(config.step_size),
            final_dist_mean: final_mean,
            final_dist_stderr: final_se,
            dist_mean,
            dist_band_lo: lo,
            dist_band_hi: hi,
        });
    }

    let erm = config.erm_schedule.as_ref().and_then(|e| {
        dfw_core::algorithms::erm_schedule(
            e.total_samples,
            e.contraction,
            e.noise_constant,
            e.initial_distance,
        )
        .ok()
        .map(|s| ErmScheduleSummary {
            rounds: s.rounds(),
            simulated_final: s.simulate_recursion(
                e.contraction,
                e.noise_constant,
                e.initial_distance,
            ),
            final_bound: s.final_bound,
            block_sizes: s.block_sizes,
        })
    });

    Summary {
        config: config.clone(),
        master_seed: config.master_seed,
        trials,
        variants,
        erm_schedule: erm,
        metadata: Metadata {
            timestamp_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            total_wall_ms: started.elapsed().as_secs_f64() * 1e3,
            workers,
        },
    }
}
