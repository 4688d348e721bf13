//! Single-round updates: least-squares weights and the two representation
//! update rules.

use crate::algorithms::IterationRecord;
use crate::datasim::{empirical_covariance, TrajectoryBatch};
use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_cond, invert_lower, orthonormalize_rows, solve_with_factor, spectral_norm, Matrix,
    OrthonormalRows,
};
use crate::metrics::DistanceOracle;

const GRAM_REL_TOL: f64 = 1e-12;

/// Representation-conditioned least squares on (labels, covariates):
/// the minimizer of sum_i ||y_i - F (rep x_i)||^2, i.e. Y^T Z (Z^T Z)^{-1}
/// with Z = X rep^T.
pub fn least_squares_weights(
    labels: &Matrix,
    covariates: &Matrix,
    rep: &OrthonormalRows,
) -> Result<Matrix> {
    least_squares_weights_ridge(labels, covariates, rep, 0.0)
}

/// l2-regularized variant: minimizes the same objective plus
/// lambda ||F||_F^2. The update rules use the plain fit; the trade-off
/// between weight conditioning and the orthonormalization factor is left
/// to callers experimenting with it.
pub fn least_squares_weights_ridge(
    labels: &Matrix,
    covariates: &Matrix,
    rep: &OrthonormalRows,
    lambda: f64,
) -> Result<Matrix> {
    let z = covariates.matmul(&rep.mat().transpose());
    let mut gram = z.tr_matmul(&z);
    if lambda > 0.0 {
        gram = gram.add_scaled(&Matrix::identity(gram.rows()), lambda);
    }
    let factor = cholesky_cond(&gram, GRAM_REL_TOL).map_err(|_| Error::SingularGram { task: 0 })?;
    // Solve (Z^T Z + lambda I) F^T = Z^T Y.
    let ft = solve_with_factor(&factor, &z.tr_matmul(labels));
    Ok(ft.transpose())
}

/// Gradient of (1/2) sum_i ||y_i - F rep x_i||^2 with respect to the
/// representation: F^T (F rep X^T X - Y^T X).
pub fn task_rep_gradient(
    labels: &Matrix,
    covariates: &Matrix,
    weights: &Matrix,
    rep: &OrthonormalRows,
) -> Matrix {
    let xtx = covariates.tr_matmul(covariates);
    let f_phi = weights.matmul(rep.mat());
    let term = &f_phi.matmul(&xtx) - &labels.tr_matmul(covariates);
    weights.tr_matmul(&term)
}

/// Result of one representation update.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub rep: OrthonormalRows,
    /// Lower-triangular orthonormalization factor: r_factor * rep equals the
    /// pre-orthonormalization task average.
    pub r_factor: Matrix,
    pub record: IterationRecord,
}

fn retag_task(e: Error, task: usize) -> Error {
    match e {
        Error::SingularGram { .. } => Error::SingularGram { task },
        Error::SingularCovariance { .. } => Error::SingularCovariance { task },
        other => other,
    }
}

/// De-biased, feature-whitened update.
///
/// Per task: weights from the first split, mean gradient over the second
/// split, then a whitened step rep - eta * G * Sigma^{-1} computed by a
/// linear solve against the sample covariance. The task average is
/// row-orthonormalized to produce the next iterate.
pub fn dfw_step(
    batch: &TrajectoryBatch,
    rep: &OrthonormalRows,
    eta: f64,
    oracle: Option<&DistanceOracle>,
    ridge_fallback: bool,
) -> Result<StepOutput> {
    let d = rep.dim();
    let r = rep.rank();
    let n2 = batch.second.len();
    // Whitening inverts a d x d covariance from n2 samples; short splits
    // cannot produce an invertible one.
    if n2 < d && !ridge_fallback {
        return Err(Error::SingularCovariance { task: 0 });
    }
    let mut sum = Matrix::zeros(r, d);
    let mut gram_sum = Matrix::zeros(r, r);
    let mut noise_sum: Option<Matrix> = Some(Matrix::zeros(r, d));
    let mut weight_norms = Vec::with_capacity(batch.tasks.len());

    for (t, task) in batch.tasks.iter().enumerate() {
        let x1 = task.covariates.select_rows(&batch.first);
        let y1 = task.labels.select_rows(&batch.first);
        let weights = least_squares_weights(&y1, &x1, rep).map_err(|e| retag_task(e, t))?;

        let x2 = task.covariates.select_rows(&batch.second);
        let y2 = task.labels.select_rows(&batch.second);
        let mut sigma2 = empirical_covariance(&x2);
        let factor = match cholesky_cond(&sigma2, GRAM_REL_TOL) {
            Ok(l) => l,
            Err(_) if ridge_fallback => {
                let ridge = (1e-6 * sigma2.trace() / d as f64).max(1e-300);
                sigma2 = sigma2.add_scaled(&Matrix::identity(d), ridge);
                cholesky_cond(&sigma2, 0.0)
                    .map_err(|_| Error::SingularCovariance { task: t })?
            }
            Err(_) => return Err(Error::SingularCovariance { task: t }),
        };

        // Mean gradient F^T (F rep Sigma2 - (1/N2) Y2^T X2).
        let f_phi = weights.matmul(rep.mat());
        let yx = y2.tr_matmul(&x2).scale(1.0 / n2 as f64);
        let grad = weights.tr_matmul(&(&f_phi.matmul(&sigma2) - &yx));

        // Whitened step: solve phi_bar Sigma2 = rep Sigma2 - eta grad.
        let target = rep.mat().matmul(&sigma2).add_scaled(&grad, -eta);
        let phi_bar = solve_with_factor(&factor, &target.transpose()).transpose();
        sum = &sum + &phi_bar;
        gram_sum = &gram_sum + &weights.tr_matmul(&weights);
        weight_norms.push(spectral_norm(&weights));

        noise_sum = match (noise_sum, &task.noise) {
            (Some(acc), Some(w)) => {
                let w2 = w.select_rows(&batch.second);
                let wx = w2.tr_matmul(&x2).scale(1.0 / n2 as f64);
                // F^T (1/N2) W2^T X2 Sigma2^{-1}
                let whitened =
                    solve_with_factor(&factor, &weights.tr_matmul(&wx).transpose()).transpose();
                Some(&acc + &whitened)
            }
            _ => None,
        };
    }

    finish_step(sum, gram_sum, noise_sum, weight_norms, eta, batch.tasks.len(), oracle)
}

/// Vanilla alternating minimization-descent baseline: weights and the raw
/// (unwhitened) gradient both computed on the full batch. The shared-data
/// fit is precisely what biases the gradient noise term.
pub fn amd_step(
    batch: &TrajectoryBatch,
    rep: &OrthonormalRows,
    eta: f64,
    oracle: Option<&DistanceOracle>,
) -> Result<StepOutput> {
    let d = rep.dim();
    let r = rep.rank();
    let n = batch.len();
    let mut sum = Matrix::zeros(r, d);
    let mut gram_sum = Matrix::zeros(r, r);
    let mut noise_sum: Option<Matrix> = Some(Matrix::zeros(r, d));
    let mut weight_norms = Vec::with_capacity(batch.tasks.len());

    for (t, task) in batch.tasks.iter().enumerate() {
        let weights = least_squares_weights(&task.labels, &task.covariates, rep)
            .map_err(|e| retag_task(e, t))?;
        let sigma = empirical_covariance(&task.covariates);
        let f_phi = weights.matmul(rep.mat());
        let yx = task.labels.tr_matmul(&task.covariates).scale(1.0 / n as f64);
        let grad = weights.tr_matmul(&(&f_phi.matmul(&sigma) - &yx));
        sum = &sum + &rep.mat().add_scaled(&grad, -eta);
        gram_sum = &gram_sum + &weights.tr_matmul(&weights);
        weight_norms.push(spectral_norm(&weights));

        noise_sum = match (noise_sum, &task.noise) {
            (Some(acc), Some(w)) => {
                let wx = w.tr_matmul(&task.covariates).scale(1.0 / n as f64);
                Some(&acc + &weights.tr_matmul(&wx))
            }
            _ => None,
        };
    }

    finish_step(sum, gram_sum, noise_sum, weight_norms, eta, batch.tasks.len(), oracle)
}

fn finish_step(
    sum: Matrix,
    gram_sum: Matrix,
    noise_sum: Option<Matrix>,
    weight_norms: Vec<f64>,
    eta: f64,
    tasks: usize,
    oracle: Option<&DistanceOracle>,
) -> Result<StepOutput> {
    let t = tasks as f64;
    let average = sum.scale(1.0 / t);
    let (rep_next, r_factor) = orthonormalize_rows(&average)?;

    let r = gram_sum.rows();
    let contraction = spectral_norm(&Matrix::identity(r).add_scaled(&gram_sum, -eta / t));
    let r_inv_norm = spectral_norm(&invert_lower(&r_factor));
    let noise_term_norm = noise_sum.map(|m| spectral_norm(&m.scale(1.0 / t)));
    let dist = oracle.map(|o| o.distance_to(&rep_next));

    Ok(StepOutput {
        rep: rep_next,
        r_factor,
        record: IterationRecord {
            iter: 0,
            dist,
            contraction_factor: contraction,
            orthogonalization_inverse_norm: r_inv_norm,
            noise_term_norm,
            weight_norms,
            wall_ms: 0.0,
        },
    })
}
