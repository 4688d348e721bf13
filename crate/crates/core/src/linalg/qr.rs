//! Householder QR, row-orthonormalization, and orthonormal complements.

use crate::error::{Error, Result};
use crate::linalg::factor::{solve_lower, solve_lower_transposed};
use crate::linalg::matrix::{Matrix, OrthonormalRows};

const RANK_TOL: f64 = 1e-12;

/// Householder QR of a tall matrix a (n x m, n >= m).
///
/// Returns (q, r) where q is n x q_cols with orthonormal columns and r is
/// m x m upper triangular, a = q[:, :m] * r. Pass `q_cols = m` for the thin
/// factor or `q_cols = n` for a full orthogonal basis.
fn householder_qr(a: &Matrix, q_cols: usize) -> (Matrix, Matrix) {
    let n = a.rows();
    let m = a.cols();
    assert!(n >= m, "householder_qr expects a tall matrix");
    assert!(q_cols == m || q_cols == n);

    let mut r = a.clone();
    // Reflectors v_k stored column-wise; each acts on rows k..n.
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m.min(n.saturating_sub(0)) {
        let mut v: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            vs.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            vs.push(Vec::new());
            continue;
        }
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        // Apply I - 2vv^T to the trailing block of r.
        for j in k..m {
            let mut dot = 0.0;
            for (off, vi) in v.iter().enumerate() {
                dot += vi * r[(k + off, j)];
            }
            for (off, vi) in v.iter().enumerate() {
                r[(k + off, j)] -= 2.0 * dot * vi;
            }
        }
        vs.push(v);
    }

    // Accumulate q by applying the reflectors to identity columns in reverse.
    let mut q = Matrix::zeros(n, q_cols);
    for j in 0..q_cols {
        let mut col = vec![0.0; n];
        col[j] = 1.0;
        for (k, v) in vs.iter().enumerate().rev() {
            if v.is_empty() {
                continue;
            }
            let mut dot = 0.0;
            for (off, vi) in v.iter().enumerate() {
                dot += vi * col[k + off];
            }
            for (off, vi) in v.iter().enumerate() {
                col[k + off] -= 2.0 * dot * vi;
            }
        }
        for i in 0..n {
            q[(i, j)] = col[i];
        }
    }

    let mut r_small = r.block(0, 0, m, m);
    // The reflectors leave rounding residue below the diagonal; the factor
    // is triangular by construction, so make it exactly so.
    for i in 0..m {
        for j in 0..i {
            r_small[(i, j)] = 0.0;
        }
    }
    (q, r_small)
}

/// Factor m (r x d, full row rank) as m = r_factor * q with q having
/// orthonormal rows and r_factor lower triangular with positive diagonal.
///
/// The sign convention makes the factorization unique, so repeated runs and
/// platforms agree bit-for-bit on the same input.
pub fn orthonormalize_rows(m: &Matrix) -> Result<(OrthonormalRows, Matrix)> {
    let r = m.rows();
    let d = m.cols();
    if r > d {
        return Err(Error::DimensionMismatch(format!(
            "row orthonormalization needs r <= d, got {r}x{d}"
        )));
    }
    let (q_thin, r_upper) = householder_qr(&m.transpose(), r);
    // m^T = q_thin * r_upper, hence m = r_upper^T * q_thin^T.
    let mut l = r_upper.transpose();
    let mut q = q_thin.transpose();

    for i in 0..r {
        if l[(i, i)] < 0.0 {
            for k in i..r {
                l[(k, i)] = -l[(k, i)];
            }
            for j in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }

    let (sigma_min, sigma_max) = triangular_singular_extremes(&l);
    if sigma_min <= RANK_TOL * sigma_max || sigma_max == 0.0 {
        return Err(Error::RankDeficient {
            sigma_min,
            sigma_max,
        });
    }
    Ok((OrthonormalRows::from_raw(q), l))
}

/// Singular value extremes of a lower-triangular matrix via power iteration
/// on L^T L and its inverse (triangular solves keep this cheap).
fn triangular_singular_extremes(l: &Matrix) -> (f64, f64) {
    let n = l.rows();
    for i in 0..n {
        if l[(i, i)] == 0.0 {
            return (0.0, l.max_abs());
        }
    }
    let mut v = Matrix::from_raw(n, 1, vec![1.0 / (n as f64).sqrt(); n]);
    let mut hi = 0.0;
    for _ in 0..200 {
        let w = l.tr_matmul(&l.matmul(&v));
        let norm = w.frobenius_norm();
        if norm == 0.0 {
            return (0.0, 0.0);
        }
        let next = norm;
        v = w.scale(1.0 / norm);
        if (next - hi).abs() <= 1e-13 * next {
            hi = next;
            break;
        }
        hi = next;
    }
    let mut u = Matrix::from_raw(n, 1, vec![1.0 / (n as f64).sqrt(); n]);
    let mut inv_hi = 0.0;
    for _ in 0..200 {
        // (L^T L)^{-1} u = L^{-1} L^{-T} u
        let w = solve_lower(l, &solve_lower_transposed(l, &u));
        let norm = w.frobenius_norm();
        if norm == 0.0 || !norm.is_finite() {
            return (0.0, hi.sqrt());
        }
        u = w.scale(1.0 / norm);
        if (norm - inv_hi).abs() <= 1e-13 * norm {
            inv_hi = norm;
            break;
        }
        inv_hi = norm;
    }
    (1.0 / inv_hi.sqrt(), hi.sqrt())
}

/// Orthonormal basis of the subspace orthogonal to the rows of p.
///
/// The stacked (d x d) matrix [p^T c^T]^T is orthogonal.
pub fn orthonormal_complement(p: &OrthonormalRows) -> Result<OrthonormalRows> {
    let r = p.rank();
    let d = p.dim();
    if r == d {
        return Err(Error::NoComplement);
    }
    let (q_full, _) = householder_qr(&p.mat().transpose(), d);
    // Columns r..d of q_full span the orthogonal complement of range(p^T).
    let comp = q_full.block(0, r, d, d - r).transpose();
    Ok(OrthonormalRows::from_raw(comp))
}
