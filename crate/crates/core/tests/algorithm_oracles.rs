//! Optimizer checks against independent oracles: finite differences for the
//! gradient, hand-rolled Gaussian elimination for the normal equations, and
//! the ground-truth decomposition of the whitened update.

use dfw_core::algorithms::{
    dfw_step, erm_schedule, least_squares_weights, run_training, task_rep_gradient,
    transfer_finetune, AlgoConfig, InitMode, Variant,
};
use dfw_core::datasim::{sample_batch, sample_holdout};
use dfw_core::linalg::{
    orthonormalize_rows, random_rotation, solve_spd, Matrix, OrthonormalRows,
};
use dfw_core::metrics::{subspace_distance, DistanceOracle};
use dfw_core::rng::DetRng;
use dfw_core::taskgen::gen_regression_problem;

fn batch_loss(labels: &Matrix, covariates: &Matrix, weights: &Matrix, phi: &Matrix) -> f64 {
    let pred = covariates.matmul(&weights.matmul(phi).transpose());
    let diff = &pred - labels;
    0.5 * diff.frobenius_norm().powi(2)
}

#[test]
fn representation_gradient_matches_central_differences() {
    // Small instance: d_x = 5, d_y = 3, r = 2, N2 = 12.
    let mut rng = DetRng::new(77);
    let covariates = rng.normal_matrix(12, 5);
    let labels = rng.normal_matrix(12, 3);
    let weights = rng.normal_matrix(3, 2);
    let (rep, _) = orthonormalize_rows(&rng.normal_matrix(2, 5)).unwrap();

    let analytic = task_rep_gradient(&labels, &covariates, &weights, &rep);

    let step = 1e-5;
    let mut numeric = Matrix::zeros(2, 5);
    for i in 0..2 {
        for j in 0..5 {
            let mut plus = rep.mat().clone();
            plus[(i, j)] += step;
            let mut minus = rep.mat().clone();
            minus[(i, j)] -= step;
            numeric[(i, j)] = (batch_loss(&labels, &covariates, &weights, &plus)
                - batch_loss(&labels, &covariates, &weights, &minus))
                / (2.0 * step);
        }
    }
    let rel = (&analytic - &numeric).frobenius_norm() / analytic.frobenius_norm();
    assert!(rel <= 1e-6, "finite-difference relative error {rel}");
}

/// Normal equations solved by plain Gaussian elimination with partial
/// pivoting, independent of the library's Cholesky path.
fn gaussian_elimination_solve(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.rows();
    let m = b.cols();
    let mut aug = Matrix::zeros(n, n + m);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)];
        }
        for j in 0..m {
            aug[(i, n + j)] = b[(i, j)];
        }
    }
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if aug[(i, k)].abs() > aug[(piv, k)].abs() {
                piv = i;
            }
        }
        for j in 0..(n + m) {
            let tmp = aug[(k, j)];
            aug[(k, j)] = aug[(piv, j)];
            aug[(piv, j)] = tmp;
        }
        for i in (k + 1)..n {
            let f = aug[(i, k)] / aug[(k, k)];
            for j in k..(n + m) {
                aug[(i, j)] -= f * aug[(k, j)];
            }
        }
    }
    let mut x = Matrix::zeros(n, m);
    for col in 0..m {
        for i in (0..n).rev() {
            let mut v = aug[(i, n + col)];
            for j in (i + 1)..n {
                v -= aug[(i, j)] * x[(j, col)];
            }
            x[(i, col)] = v / aug[(i, i)];
        }
    }
    x
}

#[test]
fn least_squares_matches_gaussian_elimination_oracle() {
    let mut rng = DetRng::new(83);
    let covariates = rng.normal_matrix(20, 6);
    let labels = rng.normal_matrix(20, 3);
    let (rep, _) = orthonormalize_rows(&rng.normal_matrix(2, 6)).unwrap();

    let fast = least_squares_weights(&labels, &covariates, &rep).unwrap();

    let z = covariates.matmul(&rep.mat().transpose());
    let gram = z.tr_matmul(&z);
    let rhs = z.tr_matmul(&labels);
    let oracle = gaussian_elimination_solve(&gram, &rhs).transpose();
    let rel = (&fast - &oracle).frobenius_norm() / oracle.frobenius_norm();
    assert!(rel <= 1e-10, "normal equation mismatch {rel}");
}

/// Ground-truth decomposition of the whitened update: starting from the
/// same weights, the data-only step must equal
/// rep - (eta/T) sum F^T (F rep - F* Phi*) + (eta/T) sum F^T W2^T X2 (X2^T X2)^{-1}.
fn dfw_truth_decomposition(
    problem: &dfw_core::taskgen::MultiTaskProblem,
    batch: &dfw_core::datasim::TrajectoryBatch,
    rep: &OrthonormalRows,
    eta: f64,
) -> Matrix {
    let t_count = batch.tasks.len() as f64;
    let mut sum = rep.mat().clone();
    for (t, task) in batch.tasks.iter().enumerate() {
        let x1 = task.covariates.select_rows(&batch.first);
        let y1 = task.labels.select_rows(&batch.first);
        let weights = least_squares_weights(&y1, &x1, rep).unwrap();

        let x2 = task.covariates.select_rows(&batch.second);
        let w2 = task.noise.as_ref().unwrap().select_rows(&batch.second);
        let contraction = weights.tr_matmul(
            &(&weights.matmul(rep.mat()) - &problem.operator(t)),
        );
        // W2^T X2 (X2^T X2)^{-1} = ((X2^T X2)^{-1} X2^T W2)^T
        let gram = x2.tr_matmul(&x2);
        let wx_inv = solve_spd(&gram, &x2.tr_matmul(&w2)).unwrap().transpose();
        let fw = weights.transpose().matmul(&wx_inv);
        sum = sum
            .add_scaled(&contraction, -eta / t_count)
            .add_scaled(&fw, eta / t_count);
    }
    sum
}

#[test]
fn dfw_update_equals_truth_decomposition_20_instances() {
    for instance in 0..20u64 {
        let p = gen_regression_problem(7, 4, 2, 3, 0.8, 0.01, 2000 + instance).unwrap();
        let batch = sample_batch(&p, 40, 0.5, 3000 + instance).unwrap();
        let rep = dfw_core::algorithms::init_representation(
            &p,
            InitMode::RandomRotationOfTruth { gamma: 0.3 },
            instance,
        )
        .unwrap();
        let eta = 0.02;
        let out = dfw_step(&batch, &rep, eta, None, false).unwrap();
        let data_route = out.r_factor.matmul(out.rep.mat());
        let truth_route = dfw_truth_decomposition(&p, &batch, &rep, eta);
        let rel = (&data_route - &truth_route).frobenius_norm()
            / truth_route.frobenius_norm().max(1.0);
        assert!(rel <= 1e-8, "instance {instance}: identity residual {rel}");
    }
}

#[test]
fn dfw_step_invariant_to_latent_rotation() {
    let p = gen_regression_problem(8, 5, 3, 4, 0.5, 0.01, 7).unwrap();
    let batch = sample_batch(&p, 60, 0.5, 11).unwrap();
    let oracle = DistanceOracle::new(&p.truth.phi_star).unwrap();
    let rep = dfw_core::algorithms::init_representation(
        &p,
        InitMode::RandomRotationOfTruth { gamma: 0.4 },
        5,
    )
    .unwrap();
    let rot = random_rotation(3, 0.9, 17);
    let (rotated, _) = orthonormalize_rows(&rot.matmul(rep.mat())).unwrap();

    let d1 = oracle.distance_to(&dfw_step(&batch, &rep, 0.05, None, false).unwrap().rep);
    let d2 = oracle.distance_to(&dfw_step(&batch, &rotated, 0.05, None, false).unwrap().rep);
    assert!((d1 - d2).abs() <= 1e-8, "{d1} vs {d2}");
}

#[test]
fn noiseless_single_task_descent_is_strict() {
    let p = gen_regression_problem(8, 4, 2, 1, 0.0, 0.01, 19).unwrap();
    let batch = sample_batch(&p, 200, 0.5, 23).unwrap();
    let oracle = DistanceOracle::new(&p.truth.phi_star).unwrap();
    let rep = dfw_core::algorithms::init_representation(
        &p,
        InitMode::RandomRotationOfTruth { gamma: 0.2 },
        3,
    )
    .unwrap();
    let before = oracle.distance_to(&rep);
    let out = dfw_step(&batch, &rep, 0.05, Some(&oracle), false).unwrap();
    let after = out.record.dist.unwrap();
    assert!(after < before, "descent failed: {before} -> {after}");
}

#[test]
fn noiseless_training_reaches_machine_floor() {
    let p = gen_regression_problem(8, 4, 2, 4, 0.0, 0.01, 11).unwrap();
    let mut config = AlgoConfig::new(Variant::Dfw, 1.0, 200, 250);
    config.step_size = dfw_core::algorithms::StepSize::OracleContraction;
    let run = run_training(&p, &config, 7).unwrap();
    let min_dist = run
        .records
        .iter()
        .filter_map(|r| r.dist)
        .fold(f64::INFINITY, f64::min);
    assert!(min_dist <= 1e-6, "noiseless floor {min_dist}");
}

#[test]
fn erm_schedule_simulated_recursion_meets_budget_bound() {
    let schedule = erm_schedule(1_000_000, 0.5, 1.0, 1.0).unwrap();
    assert!(schedule.total_samples() <= 1_000_000);
    let simulated = schedule.simulate_recursion(0.5, 1.0, 1.0);
    let closed_form = 1.0 * (2.0 * 1.0 / 1_000_000.0 * (2.0 / 0.5_f64).powi(3)).sqrt();
    assert!(
        simulated <= closed_form,
        "simulated {simulated} vs closed-form bound {closed_form}"
    );
    assert!(simulated <= schedule.final_bound + 1e-12);
}

#[test]
fn transfer_error_scales_down_with_finetune_size() {
    let p = gen_regression_problem(10, 6, 3, 2, 1.0, 0.01, 31).unwrap();
    let rep = p.truth.phi_star.clone();
    let truth_op = p.holdout_operator().unwrap();
    let mut means = Vec::new();
    for (si, n_prime) in [50usize, 200].into_iter().enumerate() {
        let mut total = 0.0;
        for trial in 0..20u64 {
            let data = sample_holdout(&p, n_prime, 900 + 40 * si as u64 + trial).unwrap();
            let fit = transfer_finetune(&rep, &data, Some(&truth_op)).unwrap();
            let e = fit.param_error.unwrap();
            total += e * e;
        }
        means.push(total / 20.0);
    }
    // Quadrupling the data should roughly quarter the squared error; allow
    // a 1.5x slack on the halving.
    assert!(
        means[1] <= means[0] / 2.0 * 1.5,
        "errors did not scale: {means:?}"
    );
}

#[test]
fn transfer_error_grows_with_misalignment() {
    let p = gen_regression_problem(10, 6, 3, 2, 0.0, 0.01, 37).unwrap();
    let truth_op = p.holdout_operator().unwrap();
    let mut errors = Vec::new();
    for (i, gamma) in [0.05, 0.2, 0.5].into_iter().enumerate() {
        let rep = dfw_core::algorithms::init_representation(
            &p,
            InitMode::RandomRotationOfTruth { gamma },
            50 + i as u64,
        )
        .unwrap();
        let dist = subspace_distance(&rep, &p.truth.phi_star).unwrap();
        let data = sample_holdout(&p, 400, 61).unwrap();
        let fit = transfer_finetune(&rep, &data, Some(&truth_op)).unwrap();
        errors.push((dist, fit.param_error.unwrap()));
    }
    assert!(errors[0].0 < errors[1].0 && errors[1].0 < errors[2].0);
    assert!(errors[0].1 > 0.0);
    assert!(
        errors[0].1 < errors[1].1 && errors[1].1 < errors[2].1,
        "param error not monotone in misalignment: {errors:?}"
    );
}
