//! Transfer evaluation: fine-tune held-out task weights on the final
//! representations of a completed run, sweeping the fine-tuning sample size.

use std::fs;
use std::path::{Path, PathBuf};

use dfw_core::algorithms::transfer_finetune;
use dfw_core::datasim::sample_holdout;
use dfw_core::linalg::OrthonormalRows;
use dfw_core::rng::DetRng;

use crate::config::ExperimentConfig;
use crate::csvio::fmt_float;
use crate::experiment::{problem_seed, rep_path, TRANSFER_STREAM};
use crate::{LabError, LabResult};

pub const TRANSFER_HEADER: &str = "variant,n_prime,mean_param_error_sq,stderr_param_error_sq";

/// Evaluate fine-tuning error against the held-out task for each requested
/// dataset size. Representation files come from a prior `run_experiment`
/// with the same config; evaluation trial i reuses the representation of
/// training trial i mod trials with fresh held-out data.
pub fn run_transfer_eval(config: &ExperimentConfig) -> LabResult<PathBuf> {
    config.validate()?;
    let transfer = config
        .transfer
        .as_ref()
        .ok_or_else(|| LabError::Config("config has no transfer block".into()))?;
    let variant = config.transfer_variant()?;
    let dir = PathBuf::from(&config.output_dir);

    let mut reps: Vec<OrthonormalRows> = Vec::with_capacity(config.trials);
    let mut problems = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let path = rep_path(&dir, &variant.name, trial);
        let text = fs::read_to_string(&path)
            .map_err(|_| LabError::MissingRepresentation(path.clone()))?;
        let rep: OrthonormalRows =
            serde_json::from_str(&text).map_err(|e| LabError::Json(e.to_string()))?;
        reps.push(rep);
        problems.push(config.generate_problem(problem_seed(config.master_seed, trial))?);
    }

    let root = DetRng::new(config.master_seed).split(TRANSFER_STREAM);
    let mut lines = vec![TRANSFER_HEADER.to_string()];
    for &n_prime in &transfer.finetune_sizes {
        let mut squared_errors = Vec::with_capacity(transfer.trials);
        for i in 0..transfer.trials {
            let trial = i % config.trials;
            let problem = &problems[trial];
            let truth_op = problem
                .holdout_operator()
                .ok_or_else(|| LabError::Config("problem has no held-out task".into()))?;
            let seed = root.split(n_prime as u64).split(i as u64).next_u64();
            let data = sample_holdout(problem, n_prime, seed)?;
            let fit = transfer_finetune(&reps[trial], &data, Some(&truth_op))?;
            let err = fit.param_error.expect("truth operator supplied");
            squared_errors.push(err * err);
        }
        let n = squared_errors.len() as f64;
        let mean = squared_errors.iter().sum::<f64>() / n;
        let stderr = if squared_errors.len() < 2 {
            0.0
        } else {
            let var = squared_errors
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / (n - 1.0);
            (var / n).sqrt()
        };
        lines.push(format!(
            "{},{},{},{}",
            variant.name,
            n_prime,
            fmt_float(mean),
            fmt_float(stderr)
        ));
    }

    let out_path = dir.join("transfer.csv");
    write_lines(&out_path, &lines)?;
    Ok(out_path)
}

fn write_lines(path: &Path, lines: &[String]) -> LabResult<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}
