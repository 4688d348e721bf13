//! Ground-truth multi-task problem generators for the three experiment
//! families: iid non-isotropic regression, linear system identification,
//! and LQR imitation learning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, dare, dlyap, orthonormalize_rows, spectral_radius_estimate, sym_eigen_extremes,
    Matrix, OrthonormalRows,
};
use crate::rng::DetRng;

/// Maximum spectral radius allowed for generated open- or closed-loop
/// dynamics. Leaves mixing nontrivial at trajectory length 100 while
/// keeping stationary covariances well conditioned.
pub const STABILITY_TARGET: f64 = 0.95;

/// Rotation scale used for task weights in the dynamical-system generators.
const TASK_ROTATION_SCALE: f64 = 0.01;

/// Problem dimensions: covariate dimension, label dimension, latent rank,
/// and number of source tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d_x: usize,
    pub d_y: usize,
    pub r: usize,
    pub tasks: usize,
}

/// Shared representation, per-task weights, and per-task noise scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Shared representation with orthonormal rows (r x d_x).
    pub phi_star: OrthonormalRows,
    /// Task weights, all d_y x r.
    pub f_star: Vec<Matrix>,
    /// Marginal covariate covariance per task, symmetric positive definite.
    pub sigma_x: Vec<Matrix>,
    /// Label-noise standard deviation per task.
    pub sigma_w: Vec<f64>,
}

impl GroundTruth {
    pub fn new(
        phi_star: OrthonormalRows,
        f_star: Vec<Matrix>,
        sigma_x: Vec<Matrix>,
        sigma_w: Vec<f64>,
    ) -> Result<Self> {
        if f_star.is_empty() || f_star.len() != sigma_x.len() || f_star.len() != sigma_w.len() {
            return Err(Error::DimensionMismatch(
                "ground truth task lists must be nonempty and equal length".into(),
            ));
        }
        let (d_y, r) = (f_star[0].rows(), f_star[0].cols());
        if r != phi_star.rank() {
            return Err(Error::DimensionMismatch(
                "task weight columns must match representation rank".into(),
            ));
        }
        for f in &f_star {
            if f.rows() != d_y || f.cols() != r {
                return Err(Error::DimensionMismatch("task weight shapes differ".into()));
            }
        }
        for s in &sigma_x {
            if !s.is_symmetric(1e-10) || s.rows() != phi_star.dim() {
                return Err(Error::InvalidInput(
                    "covariate covariance must be symmetric with matching dimension".into(),
                ));
            }
            let (lo, _) = sym_eigen_extremes(s);
            if lo <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
        }
        if sigma_w.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidInput("noise levels must be nonnegative".into()));
        }
        Ok(GroundTruth {
            phi_star,
            f_star,
            sigma_x,
            sigma_w,
        })
    }

    /// Ground-truth operator M(t) = F(t) Phi.
    pub fn operator(&self, task: usize) -> Matrix {
        self.f_star[task].matmul(self.phi_star.mat())
    }

    pub fn task_count(&self) -> usize {
        self.f_star.len()
    }
}

/// How covariates (and labels) are produced for one task.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CovariateLaw {
    /// x_i ~ N(0, sigma_x), labels y = M x + w.
    IidGaussian { sigma_x: Matrix },
    /// State trajectory x_{i+1} = A x_i + B u_i + w_i; covariate is [x; u],
    /// label is the next state. `stationary` is the dlyap solution used for
    /// the initial state.
    LinearSystem {
        a: Matrix,
        b: Matrix,
        process_noise: Matrix,
        input_std: f64,
        stationary: Matrix,
    },
    /// Observation trajectory driven by an expert feedback gain; covariate
    /// is the observation, label the expert input u = K y + z.
    ExpertClosedLoop {
        a_obs: Matrix,
        b_obs: Matrix,
        gain_obs: Matrix,
        input_noise: Matrix,
        process_noise: Matrix,
        stationary: Matrix,
    },
}

/// A held-out task sharing the problem's representation, used for
/// transfer/fine-tuning evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoldoutTask {
    pub f_star: Matrix,
    pub sigma_w: f64,
    pub law: CovariateLaw,
}

/// A complete ground-truth problem instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiTaskProblem {
    pub truth: GroundTruth,
    pub laws: Vec<CovariateLaw>,
    pub dims: Dims,
    /// Seed the generator was called with; metadata for reproducibility.
    pub seed: u64,
    /// Nominal subgaussian scale of the covariate distribution; metadata for
    /// burn-in diagnostics, never estimated from samples.
    pub subgaussian_gamma: Option<f64>,
    /// Optional held-out task for transfer evaluation.
    pub holdout: Option<HoldoutTask>,
}

impl MultiTaskProblem {
    pub fn operator(&self, task: usize) -> Matrix {
        self.truth.operator(task)
    }

    pub fn holdout_operator(&self) -> Option<Matrix> {
        self.holdout
            .as_ref()
            .map(|h| h.f_star.matmul(self.truth.phi_star.mat()))
    }

    /// Restriction to the first `tasks` tasks, sharing all ground truth.
    /// Lets paired comparisons at different task counts reuse one instance.
    pub fn subset_tasks(&self, tasks: usize) -> MultiTaskProblem {
        assert!(tasks >= 1 && tasks <= self.dims.tasks, "bad subset size");
        MultiTaskProblem {
            truth: GroundTruth {
                phi_star: self.truth.phi_star.clone(),
                f_star: self.truth.f_star[..tasks].to_vec(),
                sigma_x: self.truth.sigma_x[..tasks].to_vec(),
                sigma_w: self.truth.sigma_w[..tasks].to_vec(),
            },
            laws: self.laws[..tasks].to_vec(),
            dims: Dims {
                tasks,
                ..self.dims
            },
            seed: self.seed,
            subgaussian_gamma: self.subgaussian_gamma,
            holdout: self.holdout.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("problem JSON: {e}")))
    }

    /// FNV-1a hash of the canonical JSON form; identifies the instance in
    /// experiment summaries so paired trials can be verified.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_json().as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

fn sub_seed(root: &DetRng, tag: u64) -> u64 {
    root.split(tag).next_u64()
}

/// Random representation with orthonormal rows: thin factorization of a
/// seeded standard-normal matrix.
pub fn gen_shared_representation(d_x: usize, r: usize, seed: u64) -> Result<OrthonormalRows> {
    if r == 0 || r > d_x {
        return Err(Error::InvalidInput(format!(
            "representation rank must satisfy 1 <= r <= d_x, got r={r}, d_x={d_x}"
        )));
    }
    let mut rng = DetRng::new(seed);
    let raw = rng.normal_matrix(r, d_x);
    let (q, _) = orthonormalize_rows(&raw)?;
    Ok(q)
}

/// Task weights F(t) = F0 * R_rot(t): a common standard-normal nominal
/// weight rotated in the latent space, one rotation per task.
pub fn gen_task_weights(
    d_y: usize,
    r: usize,
    tasks: usize,
    rotation_scale: f64,
    seed: u64,
) -> Result<Vec<Matrix>> {
    if tasks == 0 {
        return Err(Error::InvalidInput("need at least one task".into()));
    }
    let root = DetRng::new(seed);
    let mut f0_rng = root.split(0);
    let f0 = f0_rng.normal_matrix(d_y, r);
    Ok(apply_task_rotations(&f0, tasks, rotation_scale, &root))
}

fn apply_task_rotations(f0: &Matrix, tasks: usize, scale: f64, root: &DetRng) -> Vec<Matrix> {
    (0..tasks)
        .map(|t| {
            let rot = crate::linalg::random_rotation(f0.cols(), scale, sub_seed(root, 1 + t as u64));
            f0.matmul(&rot)
        })
        .collect()
}

/// Non-isotropic covariance with unit average eigenvalue:
/// sigma = d * sym(U) / trace(sym(U)) with U = diag_offset I + offdiag_scale V,
/// V uniform on (0, 1). `diag_offset > 1` keeps the matrix diagonally
/// dominant at the scales used here.
pub fn gen_covariance(d: usize, diag_offset: f64, offdiag_scale: f64, seed: u64) -> Result<Matrix> {
    if diag_offset <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "diag_offset must exceed 1, got {diag_offset}"
        )));
    }
    let mut rng = DetRng::new(seed);
    let v = rng.uniform_matrix(d, d, 0.0, 1.0).scale(offdiag_scale);
    let u = v.add_scaled(&Matrix::identity(d), diag_offset);
    let sym = u.symmetrize();
    let sigma = sym.scale(d as f64 / sym.trace());
    let (lo, _) = sym_eigen_extremes(&sigma);
    if lo <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(sigma)
}

/// iid regression problem: one shared non-isotropic covariance across
/// tasks, weights rotated around a nominal F0, uniform noise level.
pub fn gen_regression_problem(
    d_x: usize,
    d_y: usize,
    r: usize,
    tasks: usize,
    noise_std: f64,
    rotation_scale: f64,
    seed: u64,
) -> Result<MultiTaskProblem> {
    let root = DetRng::new(seed);
    let phi_star = gen_shared_representation(d_x, r, sub_seed(&root, 0))?;
    let weights_root = DetRng::new(sub_seed(&root, 1));
    let mut f0_rng = weights_root.split(0);
    let f0 = f0_rng.normal_matrix(d_y, r);
    // One extra task reserved for transfer evaluation.
    let mut all_f = apply_task_rotations(&f0, tasks + 1, rotation_scale, &weights_root);
    let holdout_f = all_f.pop().expect("tasks + 1 weights generated");

    let sigma_x = gen_covariance(d_x, 5.0, 1.0, sub_seed(&root, 2))?;
    let law = CovariateLaw::IidGaussian {
        sigma_x: sigma_x.clone(),
    };
    let truth = GroundTruth::new(
        phi_star,
        all_f,
        vec![sigma_x.clone(); tasks],
        vec![noise_std; tasks],
    )?;
    let (_, gamma_sq) = sym_eigen_extremes(&sigma_x);
    Ok(MultiTaskProblem {
        truth,
        laws: vec![law.clone(); tasks],
        dims: Dims {
            d_x,
            d_y,
            r,
            tasks,
        },
        seed,
        subgaussian_gamma: Some((gamma_sq / 2.0).sqrt()),
        holdout: Some(HoldoutTask {
            f_star: holdout_f,
            sigma_w: noise_std,
            law,
        }),
    })
}

/// Linear system identification problem. Covariates are stacked
/// state-input pairs z = [x; u], labels the next state, so the operator is
/// M(t) = [A(t) B(t)] = F(t) Phi. The nominal weight is rescaled so every
/// A(t) has spectral radius at most [`STABILITY_TARGET`], and each task's
/// initial state is drawn from its stationary covariance.
pub fn gen_sysid_problem(
    d_state: usize,
    d_u: usize,
    r: usize,
    tasks: usize,
    sigma_u: f64,
    proc_noise_offset: f64,
    seed: u64,
) -> Result<MultiTaskProblem> {
    let d_z = d_state + d_u;
    if r == 0 || r > d_z {
        return Err(Error::InvalidInput(format!(
            "need 1 <= r <= d_state + d_u, got r={r}, d_z={d_z}"
        )));
    }
    let root = DetRng::new(seed);
    let phi_star = gen_shared_representation(d_z, r, sub_seed(&root, 0))?;

    let weights_root = DetRng::new(sub_seed(&root, 1));
    let mut f0_rng = weights_root.split(0);
    let f0 = f0_rng.normal_matrix(d_state, r);
    let mut all_f = apply_task_rotations(&f0, tasks + 1, TASK_ROTATION_SCALE, &weights_root);

    // Common rescaling of F0 (hence of every A(t)) to the stability target.
    let mut rho_max: f64 = 0.0;
    for f in &all_f {
        let m = f.matmul(phi_star.mat());
        let a = m.block(0, 0, d_state, d_state);
        rho_max = rho_max.max(spectral_radius_estimate(&a));
    }
    if !rho_max.is_finite() {
        return Err(Error::Unstable {
            rho_estimate: rho_max,
        });
    }
    if rho_max > STABILITY_TARGET {
        let c = STABILITY_TARGET / rho_max;
        for f in all_f.iter_mut() {
            *f = f.scale(c);
        }
    }
    let holdout_f = all_f.pop().expect("tasks + 1 weights generated");

    let process_noise = gen_covariance(d_state, proc_noise_offset, 2.0, sub_seed(&root, 2))?;
    let noise_scale = sym_eigen_extremes(&process_noise).1.sqrt();

    let mut laws = Vec::with_capacity(tasks);
    let mut sigma_x = Vec::with_capacity(tasks);
    let make_law = |f: &Matrix| -> Result<(CovariateLaw, Matrix)> {
        let m = f.matmul(phi_star.mat());
        let a = m.block(0, 0, d_state, d_state);
        let b = m.block(0, d_state, d_state, d_u);
        let forcing = b
            .matmul(&b.transpose())
            .scale(sigma_u * sigma_u)
            .add_scaled(&process_noise, 1.0);
        let stationary = dlyap(&a, &forcing)?;
        let marginal = stationary.block_diag(&Matrix::identity(d_u).scale(sigma_u * sigma_u));
        Ok((
            CovariateLaw::LinearSystem {
                a,
                b,
                process_noise: process_noise.clone(),
                input_std: sigma_u,
                stationary,
            },
            marginal,
        ))
    };
    for f in &all_f {
        let (law, marginal) = make_law(f)?;
        laws.push(law);
        sigma_x.push(marginal);
    }
    let (holdout_law, _) = make_law(&holdout_f)?;

    let gamma_sq = sigma_x
        .iter()
        .map(|s| sym_eigen_extremes(s).1)
        .fold(0.0_f64, f64::max);
    let truth = GroundTruth::new(phi_star, all_f, sigma_x, vec![noise_scale; tasks])?;
    Ok(MultiTaskProblem {
        truth,
        laws,
        dims: Dims {
            d_x: d_z,
            d_y: d_state,
            r,
            tasks,
        },
        seed,
        subgaussian_gamma: Some((gamma_sq / 2.0).sqrt()),
        holdout: Some(HoldoutTask {
            f_star: holdout_f,
            sigma_w: noise_scale,
            law: holdout_law,
        }),
    })
}

/// Imitation learning problem: experts are LQR gains for a shared (A, B)
/// with per-task state costs alpha(t) I, observed through an injective map
/// G with orthonormal columns. Covariates are observations, labels the
/// expert inputs, and the shared representation is the row-orthonormalized
/// pseudo-inverse of G (the triangular factor is absorbed into the task
/// weights). `cost_alphas` must supply tasks + 1 entries; the last becomes
/// the held-out transfer task.
pub fn gen_imitation_problem(
    n_x: usize,
    n_u: usize,
    obs_dim: usize,
    tasks: usize,
    cost_alphas: &[f64],
    seed: u64,
) -> Result<MultiTaskProblem> {
    if obs_dim < n_x {
        return Err(Error::InvalidInput(format!(
            "observation dimension {obs_dim} must be at least the state dimension {n_x}"
        )));
    }
    if cost_alphas.len() != tasks + 1 {
        return Err(Error::InvalidInput(format!(
            "need tasks + 1 = {} cost weights, got {}",
            tasks + 1,
            cost_alphas.len()
        )));
    }
    let root = DetRng::new(seed);

    // Injective observation map with orthonormal columns, so its
    // pseudo-inverse is just the transpose.
    let mut g_rng = root.split(0);
    let g_raw = g_rng.normal_matrix(obs_dim, n_x);
    let (g_rows, _) = orthonormalize_rows(&g_raw.transpose())?;
    let g = g_rows.mat().transpose();
    let g_pinv = g.transpose();

    // Every expert gain right-factors through A, so null directions of A are
    // blind spots shared by all tasks and the task-diversity constant
    // collapses. Redraw near-singular dynamics; a ratio of 0.075 rejects the
    // degenerate tail while accepting typical draws within a few attempts.
    let mut a = Matrix::zeros(n_x, n_x);
    let mut b = Matrix::zeros(n_x, n_u);
    let mut drawn = false;
    for attempt in 0..32 {
        let mut ab_rng = root.split(1).split(attempt);
        let cand_a = ab_rng.uniform_matrix(n_x, n_x, -1.0, 1.0);
        let cand_b = ab_rng.uniform_matrix(n_x, n_u, -1.0, 1.0);
        let svals = crate::linalg::singular_values(&cand_a);
        if svals[n_x - 1] >= 0.075 * svals[0] {
            a = cand_a;
            b = cand_b;
            drawn = true;
            break;
        }
    }
    if !drawn {
        return Err(Error::Unstable {
            rho_estimate: f64::NAN,
        });
    }
    let r_cost = Matrix::identity(n_u).scale(0.25);

    // DARE with positive definite state cost yields a stabilizing gain when
    // it converges; shrink A and retry on the rare degenerate draw.
    let mut gains: Vec<Matrix> = Vec::new();
    'attempts: for attempt in 0..8 {
        gains.clear();
        for &alpha in cost_alphas {
            let q_cost = Matrix::identity(n_x).scale(alpha);
            match dare(&a, &b, &q_cost, &r_cost) {
                Ok(sol) => {
                    let closed = a.add_scaled(&b.matmul(&sol.gain), 1.0);
                    if spectral_radius_estimate(&closed) >= STABILITY_TARGET + 0.04 {
                        a = a.scale(0.9);
                        continue 'attempts;
                    }
                    gains.push(sol.gain);
                }
                Err(_) if attempt + 1 < 8 => {
                    a = a.scale(0.9);
                    continue 'attempts;
                }
                Err(e) => return Err(e),
            }
        }
        break;
    }
    if gains.len() != tasks + 1 {
        return Err(Error::Unstable {
            rho_estimate: f64::NAN,
        });
    }

    let (phi_star, r_factor) = orthonormalize_rows(&g_pinv)?;
    let a_obs = g.matmul(&a).matmul(&g_pinv);
    let b_obs = g.matmul(&b);
    let input_noise = Matrix::identity(n_u);
    let process_noise = gen_covariance(obs_dim, 5.0, 1.0, sub_seed(&root, 2))?;

    let make_task = |gain: &Matrix| -> Result<(Matrix, CovariateLaw)> {
        // Operator K G^+ = (K R) Phi, so the task weight is K R.
        let f = gain.matmul(&r_factor);
        let gain_obs = gain.matmul(&g_pinv);
        let closed = a_obs.add_scaled(&b_obs.matmul(&gain_obs), 1.0);
        let forcing = b_obs
            .matmul(&input_noise)
            .matmul(&b_obs.transpose())
            .add_scaled(&process_noise, 1.0);
        let stationary = dlyap(&closed, &forcing.symmetrize())?;
        Ok((
            f,
            CovariateLaw::ExpertClosedLoop {
                a_obs: a_obs.clone(),
                b_obs: b_obs.clone(),
                gain_obs,
                input_noise: input_noise.clone(),
                process_noise: process_noise.clone(),
                stationary,
            },
        ))
    };

    let mut f_star = Vec::with_capacity(tasks);
    let mut laws = Vec::with_capacity(tasks);
    let mut sigma_x = Vec::with_capacity(tasks);
    for gain in &gains[..tasks] {
        let (f, law) = make_task(gain)?;
        if let CovariateLaw::ExpertClosedLoop { ref stationary, .. } = law {
            sigma_x.push(stationary.clone());
        }
        f_star.push(f);
        laws.push(law);
    }
    let (holdout_f, holdout_law) = make_task(&gains[tasks])?;

    let gamma_sq = sigma_x
        .iter()
        .map(|s| sym_eigen_extremes(s).1)
        .fold(0.0_f64, f64::max);
    let truth = GroundTruth::new(phi_star, f_star, sigma_x, vec![1.0; tasks])?;
    Ok(MultiTaskProblem {
        truth,
        laws,
        dims: Dims {
            d_x: obs_dim,
            d_y: n_u,
            r: n_x,
            tasks,
        },
        seed,
        subgaussian_gamma: Some((gamma_sq / 2.0).sqrt()),
        holdout: Some(HoldoutTask {
            f_star: holdout_f,
            sigma_w: 1.0,
            law: holdout_law,
        }),
    })
}

/// Cholesky factor with a tiny diagonal jitter fallback, for sampling from
/// covariances that are positive definite but numerically borderline.
pub(crate) fn sampling_cholesky(sigma: &Matrix) -> Result<Matrix> {
    match cholesky(sigma) {
        Ok(l) => Ok(l),
        Err(_) => {
            let jitter = 1e-12 * sigma.trace().abs().max(1.0) / sigma.rows() as f64;
            cholesky(&sigma.add_scaled(&Matrix::identity(sigma.rows()), jitter))
        }
    }
}

/// logspace(lo, hi, n): n points whose base-10 logarithms are evenly spaced.
pub fn logspace(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powf(lo_exp)];
    }
    (0..n)
        .map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (n - 1) as f64))
        .collect()
}
