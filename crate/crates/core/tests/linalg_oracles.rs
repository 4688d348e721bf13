//! Kernel checks against independent oracles: reconstruction residuals,
//! truncated-series solutions, and brute-force iterations implemented here
//! rather than through the library's own code paths.

use dfw_core::linalg::{
    dare, dlyap, matrix_exponential, orthonormal_complement, orthonormalize_rows,
    random_rotation, singular_values, spectral_norm, Matrix, OrthonormalRows,
};
use dfw_core::rng::DetRng;

fn random_shape(rng: &mut DetRng, max_dim: usize) -> (usize, usize) {
    let r = 1 + (rng.next_u64() as usize) % max_dim;
    let d = r + (rng.next_u64() as usize) % (max_dim - r + 1);
    (r, d)
}

#[test]
fn qr_reconstruction_orthogonality_100_instances() {
    let mut rng = DetRng::new(101);
    for _ in 0..100 {
        let (r, d) = random_shape(&mut rng, 10);
        let m = rng.normal_matrix(r, d);
        let (q, l) = orthonormalize_rows(&m).expect("full rank with probability one");

        let recon = l.matmul(q.mat());
        let rel = (&recon - &m).frobenius_norm() / m.frobenius_norm();
        assert!(rel <= 1e-10, "reconstruction {rel}");

        let gram = q.mat().matmul(&q.mat().transpose());
        let dev = (&gram - &Matrix::identity(r)).frobenius_norm();
        assert!(dev <= 1e-10, "orthogonality {dev}");

        for i in 0..r {
            assert!(l[(i, i)] > 0.0, "diagonal sign convention");
            for j in (i + 1)..r {
                assert!(l[(i, j)] == 0.0, "upper part of the triangular factor");
            }
        }
    }
}

#[test]
fn qr_idempotent_on_orthonormal_rows() {
    let mut rng = DetRng::new(103);
    for _ in 0..20 {
        let (r, d) = random_shape(&mut rng, 8);
        let (q, _) = orthonormalize_rows(&rng.normal_matrix(r, d)).unwrap();
        let (q2, l2) = orthonormalize_rows(q.mat()).unwrap();
        assert!((&l2 - &Matrix::identity(r)).max_abs() < 1e-10);
        assert!((q2.mat() - q.mat()).max_abs() < 1e-10);
    }
}

#[test]
fn complement_orthogonality_residuals() {
    let mut rng = DetRng::new(107);
    for _ in 0..20 {
        let (q, _) = orthonormalize_rows(&rng.normal_matrix(3, 7)).unwrap();
        let c = orthonormal_complement(&q).unwrap();
        assert!(q.mat().matmul(&c.mat().transpose()).max_abs() <= 1e-10);
        let stacked_t = q.mat().transpose().hstack(&c.mat().transpose());
        let gram = stacked_t.tr_matmul(&stacked_t);
        assert!((&gram - &Matrix::identity(7)).max_abs() <= 1e-10);
    }
}

/// Brute-force power iteration on M^T M, written independently of the
/// library's spectral norm.
fn power_iteration_oracle(m: &Matrix) -> f64 {
    let n = m.cols();
    let mut v: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sin() + 1.5).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let mv = m.matvec(&v);
        let w = m.tr_matvec(&mv);
        let wnorm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wnorm == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / wnorm).collect();
        if (wnorm - lambda).abs() <= 1e-15 * wnorm {
            lambda = wnorm;
            break;
        }
        lambda = wnorm;
    }
    lambda.sqrt()
}

#[test]
fn spectral_norm_matches_power_iteration_oracle() {
    let mut rng = DetRng::new(109);
    for _ in 0..10 {
        let m = rng.normal_matrix(5, 8);
        let fast = spectral_norm(&m);
        let oracle = power_iteration_oracle(&m);
        assert!(
            (fast - oracle).abs() <= 1e-8 * oracle,
            "{fast} vs oracle {oracle}"
        );
        let top_sv = singular_values(&m)[0];
        assert!((fast - top_sv).abs() <= 1e-10 * oracle);
    }
}

#[test]
fn spectral_norm_transpose_symmetry_property() {
    let mut rng = DetRng::new(113);
    for _ in 0..30 {
        let (r, d) = random_shape(&mut rng, 12);
        let m = rng.normal_matrix(r, d);
        let a = spectral_norm(&m);
        let b = spectral_norm(&m.transpose());
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

/// Truncated Neumann series sum_{k<=K} A^k Q (A^T)^k, independent of the
/// doubling recursion used by the solver.
fn dlyap_series_oracle(a: &Matrix, q: &Matrix, terms: usize) -> Matrix {
    let mut sum = q.clone();
    let mut pow = a.clone();
    for _ in 0..terms {
        sum = &sum + &pow.matmul(q).matmul(&pow.transpose());
        pow = pow.matmul(a);
    }
    sum
}

#[test]
fn dlyap_residuals_and_series_oracle_100_instances() {
    let mut rng = DetRng::new(127);
    for i in 0..100 {
        let d = 2 + (rng.next_u64() as usize) % 9;
        let raw = rng.normal_matrix(d, d);
        let rho = dfw_core::linalg::spectral_radius_estimate(&raw).max(1e-6);
        let a = raw.scale(0.8 / rho);
        let g = rng.normal_matrix(d, d);
        let q = g.tr_matmul(&g);
        let sigma = dlyap(&a, &q).unwrap();

        let recon = &a.matmul(&sigma).matmul(&a.transpose()) + &q;
        let res = (&sigma - &recon).frobenius_norm();
        assert!(
            res <= 1e-10 * sigma.frobenius_norm().max(1.0),
            "instance {i}: residual {res}"
        );

        if i < 10 {
            // 0.8^(2*120) is far below the 1e-8 comparison tolerance.
            let series = dlyap_series_oracle(&a, &q, 120);
            let rel = (&sigma - &series).frobenius_norm() / sigma.frobenius_norm();
            assert!(rel <= 1e-8, "instance {i}: series mismatch {rel}");
        }
    }
}

#[test]
fn dare_scalar_quadratic_root_oracle() {
    let a = Matrix::diag(&[0.9]);
    let b = Matrix::diag(&[1.0]);
    let q = Matrix::diag(&[1.0]);
    let r = Matrix::diag(&[1.0]);
    let sol = dare(&a, &b, &q, &r).unwrap();
    let p = sol.cost[(0, 0)];

    // Fixed point of p = a^2 p - a^2 p^2/(p + r) + q, found by bisection.
    let f = |x: f64| 0.81 * x - 0.81 * x * x / (x + 1.0) + 1.0 - x;
    let (mut lo, mut hi) = (0.0_f64, 100.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    assert!((p - root).abs() <= 1e-10 * root, "{p} vs bisection {root}");
    assert!(f(p).abs() <= 1e-10);
    assert!((0.9 + sol.gain[(0, 0)]).abs() < 1.0);
}

#[test]
fn dare_residuals_and_closed_loops_100_instances() {
    let mut rng = DetRng::new(131);
    for i in 0..100 {
        let n = 2 + (rng.next_u64() as usize) % 5;
        let m = 1 + (rng.next_u64() as usize) % n;
        let a = rng.uniform_matrix(n, n, -1.0, 1.0);
        let b = rng.uniform_matrix(n, m, -1.0, 1.0);
        let gq = rng.normal_matrix(n, n);
        let q = gq.tr_matmul(&gq).scale(0.5);
        let r = Matrix::identity(m).scale(0.25);
        let sol = match dare(&a, &b, &q, &r) {
            Ok(s) => s,
            // Uncontrollable draws are legitimately rejected.
            Err(_) => continue,
        };
        let res = dfw_core::linalg::dare_residual(&a, &b, &q, &r, &sol.cost);
        assert!(
            res <= 1e-8 * sol.cost.frobenius_norm().max(1.0),
            "instance {i}: residual {res}"
        );
        let closed = a.add_scaled(&b.matmul(&sol.gain), 1.0);
        assert!(
            dfw_core::linalg::spectral_radius_estimate(&closed) < 1.0,
            "instance {i}: unstable closed loop"
        );
    }
}

#[test]
fn rotation_orthogonality_determinant_and_continuity() {
    for seed in 0..20u64 {
        let rot = random_rotation(6, 0.5, seed);
        let gram = rot.matmul(&rot.transpose());
        assert!((&gram - &Matrix::identity(6)).max_abs() <= 1e-10);
        assert!((dfw_core::linalg::determinant(&rot) - 1.0).abs() <= 1e-10);
    }
    for gamma in [0.01, 0.05, 0.1] {
        let rot = random_rotation(8, gamma, 3);
        assert!((&rot - &Matrix::identity(8)).frobenius_norm() <= 10.0 * gamma);
    }
}

#[test]
fn matrix_exponential_inverse_identity_oracle() {
    let mut rng = DetRng::new(137);
    for _ in 0..10 {
        let g = rng.normal_matrix(6, 6);
        let skew = (&g - &g.transpose()).scale(0.5);
        let prod = matrix_exponential(&skew).matmul(&matrix_exponential(&skew.scale(-1.0)));
        assert!((&prod - &Matrix::identity(6)).max_abs() <= 1e-10);
    }
}

#[test]
fn orthonormal_rows_newtype_enforces_tolerance() {
    let mut rng = DetRng::new(139);
    let (q, _) = orthonormalize_rows(&rng.normal_matrix(3, 9)).unwrap();
    // Perturb beyond the 1e-10 gate.
    let mut bad = q.mat().clone();
    bad[(0, 0)] += 1e-4;
    assert!(OrthonormalRows::new(bad).is_err());
}
