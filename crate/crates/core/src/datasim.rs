//! Per-round data batches: iid draws, linear-system rollouts, and expert
//! closed-loop rollouts, with the disjoint split used for de-biasing.

use std::io;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::DetRng;
use crate::taskgen::{sampling_cholesky, CovariateLaw, HoldoutTask, MultiTaskProblem};

/// Stream tag for the initial state of a trajectory; sample indices are
/// far below this so the streams never collide.
const INIT_STREAM: u64 = u64::MAX;

/// Samples for one task within a round.
#[derive(Debug, Clone)]
pub struct TaskSample {
    /// N x d_x covariates.
    pub covariates: Matrix,
    /// N x d_y labels.
    pub labels: Matrix,
    /// N x d_y realized label noise; present in simulation so diagnostics
    /// can isolate the noise term, never consumed by the optimizers' updates.
    pub noise: Option<Matrix>,
}

/// One optimization round of data for all tasks, plus the index split.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub tasks: Vec<TaskSample>,
    /// Indices used for the weight fit (N1).
    pub first: Vec<usize>,
    /// Indices used for the representation gradient (N2), disjoint from N1.
    pub second: Vec<usize>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.tasks.first().map_or(0, |t| t.covariates.rows())
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// How the per-round index set is divided between the weight fit and the
/// gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// N1 is a prefix of the trajectory, N2 the remaining suffix. Keeps the
    /// two halves on disjoint time ranges, which is what the de-biasing
    /// argument needs for mixing data.
    Contiguous,
    /// N1 spread evenly through the trajectory; ablation only.
    Interleaved,
}

fn split_indices(n: usize, fraction: f64, kind: SplitKind) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) && fraction != 0.0 {
        // fraction 1.0 or out of range cannot leave both parts nonempty
        return Err(Error::BadSplit { n, n1: n });
    }
    let n1 = (fraction * n as f64).ceil() as usize;
    if n1 == 0 || n1 >= n {
        return Err(Error::BadSplit { n, n1 });
    }
    match kind {
        SplitKind::Contiguous => Ok(((0..n1).collect(), (n1..n).collect())),
        SplitKind::Interleaved => {
            let mut first = Vec::with_capacity(n1);
            let mut second = Vec::with_capacity(n - n1);
            let f = n1 as f64 / n as f64;
            for i in 0..n {
                let lo = (i as f64 * f).floor();
                let hi = ((i + 1) as f64 * f).floor();
                if hi > lo && first.len() < n1 {
                    first.push(i);
                } else {
                    second.push(i);
                }
            }
            Ok((first, second))
        }
    }
}

/// Draw one fresh batch for every task of the problem.
///
/// Sub-streams are derived per (task, index), so each task's data is
/// reproducible in isolation and independent of sampling order.
pub fn sample_batch(
    problem: &MultiTaskProblem,
    n: usize,
    split_fraction: f64,
    seed: u64,
) -> Result<TrajectoryBatch> {
    sample_batch_with(problem, n, split_fraction, SplitKind::Contiguous, seed)
}

pub fn sample_batch_with(
    problem: &MultiTaskProblem,
    n: usize,
    split_fraction: f64,
    kind: SplitKind,
    seed: u64,
) -> Result<TrajectoryBatch> {
    if n < 2 {
        return Err(Error::BadSplit { n, n1: n });
    }
    let (first, second) = split_indices(n, split_fraction, kind)?;
    let root = DetRng::new(seed);
    let mut tasks = Vec::with_capacity(problem.dims.tasks);
    for t in 0..problem.dims.tasks {
        let task_rng = root.split(t as u64);
        let sample = sample_task(
            &problem.laws[t],
            &problem.operator(t),
            problem.truth.sigma_w[t],
            n,
            &task_rng,
        )?;
        tasks.push(sample);
    }
    Ok(TrajectoryBatch {
        tasks,
        first,
        second,
    })
}

/// Fresh data from the problem's held-out task, for transfer evaluation.
pub fn sample_holdout(problem: &MultiTaskProblem, n: usize, seed: u64) -> Result<TaskSample> {
    let holdout: &HoldoutTask = problem
        .holdout
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("problem has no held-out task".into()))?;
    let operator = holdout.f_star.matmul(problem.truth.phi_star.mat());
    let root = DetRng::new(seed);
    sample_task(&holdout.law, &operator, holdout.sigma_w, n, &root)
}

/// Apply a lower-triangular Cholesky factor: out = l * v.
fn tri_apply(l: &Matrix, v: &[f64], out: &mut [f64]) {
    for (i, slot) in out.iter_mut().enumerate() {
        let row = l.row(i);
        *slot = row[..=i].iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn matvec_into(m: &Matrix, v: &[f64], out: &mut [f64]) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = m.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

pub fn sample_task(
    law: &CovariateLaw,
    operator: &Matrix,
    sigma_w: f64,
    n: usize,
    rng: &DetRng,
) -> Result<TaskSample> {
    match law {
        CovariateLaw::IidGaussian { sigma_x } => {
            let d_x = sigma_x.rows();
            let d_y = operator.rows();
            let chol = sampling_cholesky(sigma_x)?;
            let mut xs = Matrix::zeros(n, d_x);
            let mut ys = Matrix::zeros(n, d_y);
            let mut ws = Matrix::zeros(n, d_y);
            let mut g = vec![0.0; d_x.max(d_y)];
            let mut x = vec![0.0; d_x];
            let mut y = vec![0.0; d_y];
            for i in 0..n {
                let mut s = rng.split(i as u64);
                s.fill_normal(&mut g[..d_x]);
                tri_apply(&chol, &g[..d_x], &mut x);
                matvec_into(operator, &x, &mut y);
                s.fill_normal(&mut g[..d_y]);
                for j in 0..d_x {
                    xs[(i, j)] = x[j];
                }
                for j in 0..d_y {
                    let w = sigma_w * g[j];
                    ys[(i, j)] = y[j] + w;
                    ws[(i, j)] = w;
                }
            }
            Ok(TaskSample {
                covariates: xs,
                labels: ys,
                noise: Some(ws),
            })
        }
        CovariateLaw::LinearSystem {
            a,
            b,
            process_noise,
            input_std,
            stationary,
        } => {
            let d_s = a.rows();
            let d_u = b.cols();
            let chol0 = sampling_cholesky(stationary)?;
            let cholw = sampling_cholesky(process_noise)?;
            let mut state = vec![0.0; d_s];
            {
                let mut s = rng.split(INIT_STREAM);
                let g = s.normal_vec(d_s);
                tri_apply(&chol0, &g, &mut state);
            }
            let mut xs = Matrix::zeros(n, d_s + d_u);
            let mut ys = Matrix::zeros(n, d_s);
            let mut ws = Matrix::zeros(n, d_s);
            let mut g = vec![0.0; d_s.max(d_u)];
            let mut input = vec![0.0; d_u];
            let mut noise = vec![0.0; d_s];
            let mut next = vec![0.0; d_s];
            let mut bu = vec![0.0; d_s];
            for i in 0..n {
                let mut s = rng.split(i as u64);
                s.fill_normal(&mut g[..d_u]);
                for j in 0..d_u {
                    input[j] = input_std * g[j];
                }
                s.fill_normal(&mut g[..d_s]);
                tri_apply(&cholw, &g[..d_s], &mut noise);
                matvec_into(a, &state, &mut next);
                matvec_into(b, &input, &mut bu);
                for j in 0..d_s {
                    next[j] += bu[j] + noise[j];
                    xs[(i, j)] = state[j];
                    ys[(i, j)] = next[j];
                    ws[(i, j)] = noise[j];
                }
                for j in 0..d_u {
                    xs[(i, d_s + j)] = input[j];
                }
                std::mem::swap(&mut state, &mut next);
            }
            Ok(TaskSample {
                covariates: xs,
                labels: ys,
                noise: Some(ws),
            })
        }
        CovariateLaw::ExpertClosedLoop {
            a_obs,
            b_obs,
            gain_obs,
            input_noise,
            process_noise,
            stationary,
        } => {
            let d_obs = a_obs.rows();
            let d_u = b_obs.cols();
            let chol0 = sampling_cholesky(stationary)?;
            let cholz = sampling_cholesky(input_noise)?;
            let cholw = sampling_cholesky(process_noise)?;
            let mut obs = vec![0.0; d_obs];
            {
                let mut s = rng.split(INIT_STREAM);
                let g = s.normal_vec(d_obs);
                tri_apply(&chol0, &g, &mut obs);
            }
            let mut xs = Matrix::zeros(n, d_obs);
            let mut ys = Matrix::zeros(n, d_u);
            let mut ws = Matrix::zeros(n, d_u);
            let mut g = vec![0.0; d_obs.max(d_u)];
            let mut z = vec![0.0; d_u];
            let mut w = vec![0.0; d_obs];
            let mut input = vec![0.0; d_u];
            let mut next = vec![0.0; d_obs];
            let mut bu = vec![0.0; d_obs];
            for i in 0..n {
                let mut s = rng.split(i as u64);
                s.fill_normal(&mut g[..d_u]);
                tri_apply(&cholz, &g[..d_u], &mut z);
                s.fill_normal(&mut g[..d_obs]);
                tri_apply(&cholw, &g[..d_obs], &mut w);
                matvec_into(gain_obs, &obs, &mut input);
                for j in 0..d_u {
                    input[j] += z[j];
                    ys[(i, j)] = input[j];
                    ws[(i, j)] = z[j];
                }
                for j in 0..d_obs {
                    xs[(i, j)] = obs[j];
                }
                matvec_into(a_obs, &obs, &mut next);
                matvec_into(b_obs, &input, &mut bu);
                for j in 0..d_obs {
                    next[j] += bu[j] + w[j];
                }
                std::mem::swap(&mut obs, &mut next);
            }
            Ok(TaskSample {
                covariates: xs,
                labels: ys,
                noise: Some(ws),
            })
        }
    }
}

/// Sample second-moment matrix (1/N) X^T X.
pub fn empirical_covariance(x: &Matrix) -> Matrix {
    x.tr_matmul(x).scale(1.0 / x.rows() as f64).symmetrize()
}

/// One-task CSV export: index, covariate components, label components.
pub fn write_task_csv<W: io::Write>(task: &TaskSample, mut out: W) -> io::Result<()> {
    let d_x = task.covariates.cols();
    let d_y = task.labels.cols();
    let mut header = String::from("index");
    for j in 0..d_x {
        header.push_str(&format!(",x_{j}"));
    }
    for j in 0..d_y {
        header.push_str(&format!(",y_{j}"));
    }
    writeln!(out, "{header}")?;
    for i in 0..task.covariates.rows() {
        let mut line = i.to_string();
        for v in task.covariates.row(i) {
            line.push_str(&format!(",{v:.16e}"));
        }
        for v in task.labels.row(i) {
            line.push_str(&format!(",{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
