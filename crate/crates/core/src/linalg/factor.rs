//! Cholesky and triangular solves; small direct factorizations.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    assert!(m.is_square(), "cholesky of non-square matrix");
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let dsqrt = diag.sqrt();
        l[(j, j)] = dsqrt;
        for i in (j + 1)..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / dsqrt;
        }
    }
    Ok(l)
}

/// Solve L x = b for lower-triangular L, one column per rhs column.
pub fn solve_lower(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    assert_eq!(b.rows(), n, "rhs row mismatch");
    let mut x = b.clone();
    for col in 0..b.cols() {
        for i in 0..n {
            let mut v = x[(i, col)];
            for k in 0..i {
                v -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = v / l[(i, i)];
        }
    }
    x
}

/// Solve L^T x = b for lower-triangular L.
pub fn solve_lower_transposed(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    assert_eq!(b.rows(), n, "rhs row mismatch");
    let mut x = b.clone();
    for col in 0..b.cols() {
        for i in (0..n).rev() {
            let mut v = x[(i, col)];
            for k in (i + 1)..n {
                v -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = v / l[(i, i)];
        }
    }
    x
}

/// Solve S x = b for symmetric positive definite S via Cholesky.
pub fn solve_spd(s: &Matrix, b: &Matrix) -> Result<Matrix> {
    let l = cholesky(s)?;
    Ok(solve_lower_transposed(&l, &solve_lower(&l, b)))
}

/// Cholesky with a relative pivot threshold: fails when any pivot falls to
/// `rel_tol` times the largest diagonal of the input. Detects numerical
/// rank deficiency that eigenvalue iterations cannot resolve.
pub fn cholesky_cond(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    assert!(m.is_square(), "cholesky of non-square matrix");
    let n = m.rows();
    let floor = rel_tol * (0..n).map(|i| m[(i, i)]).fold(0.0_f64, f64::max);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= floor || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let dsqrt = diag.sqrt();
        l[(j, j)] = dsqrt;
        for i in (j + 1)..n {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / dsqrt;
        }
    }
    Ok(l)
}

/// Solve with a precomputed lower Cholesky factor.
pub fn solve_with_factor(l: &Matrix, b: &Matrix) -> Matrix {
    solve_lower_transposed(l, &solve_lower(l, b))
}

/// Inverse of a lower-triangular matrix by forward substitution on I.
pub fn invert_lower(l: &Matrix) -> Matrix {
    solve_lower(l, &Matrix::identity(l.rows()))
}

/// Determinant via Gaussian elimination with partial pivoting.
pub fn determinant(m: &Matrix) -> f64 {
    assert!(m.is_square(), "determinant of non-square matrix");
    let n = m.rows();
    let mut a = m.clone();
    let mut det = 1.0;
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if a[(i, k)].abs() > a[(piv, k)].abs() {
                piv = i;
            }
        }
        if a[(piv, k)] == 0.0 {
            return 0.0;
        }
        if piv != k {
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            det = -det;
        }
        det *= a[(k, k)];
        for i in (k + 1)..n {
            let factor = a[(i, k)] / a[(k, k)];
            for j in k..n {
                a[(i, j)] -= factor * a[(k, j)];
            }
        }
    }
    det
}
