//! Spectral quantities via deterministic power iterations and Jacobi sweeps.

use crate::linalg::Matrix;

const POWER_ITER_CAP: usize = 10_000;
const POWER_REL_TOL: f64 = 1e-13;

/// Deterministic start vector: all-ones with a tiny index ramp so symmetric
/// sign patterns cannot leave the start exactly orthogonal to the top
/// eigenvector.
fn start_vector(n: usize) -> Matrix {
    let data: Vec<f64> = (0..n).map(|i| 1.0 + 1e-4 * i as f64).collect();
    let norm = data.iter().map(|x| x * x).sum::<f64>().sqrt();
    Matrix::from_raw(n, 1, data.iter().map(|x| x / norm).collect())
}

/// Dimension below which Gram-matrix Jacobi replaces power iteration.
/// Power iteration stalls against its cap when leading singular values
/// cluster (ratio tests near distance one do exactly that), while Jacobi on
/// a small Gram matrix is exact and takes microseconds.
const DIRECT_EIG_DIM: usize = 64;

/// Largest singular value, i.e. the spectral norm.
///
/// Small matrices go through an exact symmetric eigensolve of the Gram
/// matrix; large ones use power iteration on M^T M (or M M^T, whichever is
/// smaller) applied as two matrix-vector products.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let fro = m.frobenius_norm();
    if fro == 0.0 {
        return 0.0;
    }
    let tall = m.rows() >= m.cols();
    let n = if tall { m.cols() } else { m.rows() };
    if n <= DIRECT_EIG_DIM {
        let gram = if tall {
            m.tr_matmul(m)
        } else {
            let mt = m.transpose();
            mt.tr_matmul(&mt)
        };
        let eigs = sym_eigenvalues(&gram);
        return eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    }
    let mut v = start_vector(n);
    let mut prev = 0.0;
    for _ in 0..POWER_ITER_CAP {
        // Iterate on M^T M for tall inputs, M M^T for wide ones.
        let w = if tall {
            let mv = m.matvec(v.data());
            Matrix::from_raw(n, 1, m.tr_matvec(&mv))
        } else {
            let mtv = m.tr_matvec(v.data());
            Matrix::from_raw(n, 1, m.matvec(&mtv))
        };
        let lambda = w.frobenius_norm();
        if lambda == 0.0 {
            // Start vector lies in the null space; frobenius/sqrt(rank) still
            // bounds the norm, fall back to a coordinate sweep.
            return coordinate_sweep_norm(m);
        }
        v = w.scale(1.0 / lambda);
        if (lambda - prev).abs() <= POWER_REL_TOL * lambda {
            return lambda.sqrt();
        }
        prev = lambda;
    }
    prev.sqrt()
}

fn coordinate_sweep_norm(m: &Matrix) -> f64 {
    let n = m.cols().min(m.rows());
    let tall = m.rows() >= m.cols();
    let mut best = 0.0_f64;
    for j in 0..n {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        let len = if tall {
            let mv = m.matvec(&v);
            mv.iter().map(|x| x * x).sum::<f64>()
        } else {
            let mv = m.tr_matvec(&v);
            mv.iter().map(|x| x * x).sum::<f64>()
        };
        best = best.max(len);
    }
    best.sqrt()
}

/// (lambda_min, lambda_max) of a symmetric matrix.
///
/// Small matrices use the exact Jacobi eigensolve; larger ones use power
/// iteration on S shifted to be positive definite for lambda_max, then a
/// second shifted iteration on (lambda_max I - S) for lambda_min.
pub fn sym_eigen_extremes(s: &Matrix) -> (f64, f64) {
    assert!(s.is_square(), "sym_eigen_extremes of non-square matrix");
    let n = s.rows();
    if n <= DIRECT_EIG_DIM {
        let eigs = sym_eigenvalues(s);
        return (eigs[0], eigs[n - 1]);
    }
    let shift = s.frobenius_norm() + 1.0;
    let shifted = s.add_scaled(&Matrix::identity(n), shift);
    let hi = power_iteration_sym(&shifted) - shift;
    // lambda_max((hi + shift) I - s) = hi + shift - lambda_min(s).
    let flipped = Matrix::identity(n).scale(hi + shift).add_scaled(s, -1.0);
    let lo = hi + shift - power_iteration_sym(&flipped);
    (lo, hi)
}

fn power_iteration_sym(s: &Matrix) -> f64 {
    let n = s.rows();
    let mut v = start_vector(n);
    let mut prev = 0.0;
    for _ in 0..POWER_ITER_CAP {
        let w = Matrix::from_raw(n, 1, s.matvec(v.data()));
        let lambda = w.frobenius_norm();
        if lambda == 0.0 {
            return 0.0;
        }
        v = w.scale(1.0 / lambda);
        if (lambda - prev).abs() <= POWER_REL_TOL * lambda.max(1e-300) {
            return lambda;
        }
        prev = lambda;
    }
    prev
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// ascending order. Intended for small dimensions (d <= 100).
pub fn sym_eigenvalues(s: &Matrix) -> Vec<f64> {
    assert!(s.is_square(), "sym_eigenvalues of non-square matrix");
    let n = s.rows();
    let mut a = s.symmetrize();
    let scale = a.frobenius_norm().max(1e-300);
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= 1e-13 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_ = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s_ * akq;
                    a[(k, q)] = s_ * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s_ * aqk;
                    a[(q, k)] = s_ * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Singular values by one-sided Jacobi orthogonalization, descending.
///
/// Rotates column pairs of the tall orientation until all pairs are
/// orthogonal; column norms are then the singular values. Tiny singular
/// values come out with high relative accuracy, unlike the eigenvalues of
/// the squared Gram matrix.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let a = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.transpose()
    };
    let n = a.cols();
    let rows = a.rows();
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..rows).map(|i| a[(i, j)]).collect())
        .collect();
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut g = 0.0;
                for (vp, vq) in cols[p].iter().zip(&cols[q]) {
                    alpha += vp * vp;
                    beta += vq * vq;
                    g += vp * vq;
                }
                if g.abs() <= 1e-15 * (alpha * beta).sqrt() || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (head, tail) = cols.split_at_mut(q);
                for (vp, vq) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let (a, b) = (*vp, *vq);
                    *vp = c * a - s * b;
                    *vq = s * a + c * b;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
    let mut svals: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    svals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    svals
}

/// Upper estimate of the spectral radius via Gelfand's formula on repeated
/// squarings: rho(A) <= ||A^k||_F^(1/k), with the bound tightening as k grows.
///
/// Returns an estimate that is always >= rho(A) up to the squaring budget;
/// values above 1e6 mean the powers blew up (certainly unstable).
pub fn spectral_radius_estimate(a: &Matrix) -> f64 {
    assert!(a.is_square(), "spectral radius of non-square matrix");
    let mut p = a.clone();
    let mut k = 1u64;
    let mut best = f64::INFINITY;
    for step in 0..40 {
        let norm = p.frobenius_norm();
        if norm == 0.0 {
            // Exactly nilpotent on the first step, otherwise the powers
            // underflowed and the best estimate so far already bounds rho.
            return if step == 0 { 0.0 } else { best };
        }
        if !norm.is_finite() || norm > 1e150 {
            return best.clamp(1.0 + 1e-3, 1e6);
        }
        let estimate = norm.powf(1.0 / k as f64);
        best = best.min(estimate);
        if estimate < 1e-8 {
            return estimate;
        }
        p = p.matmul(&p);
        k *= 2;
    }
    best
}
