//! Discrete algebraic Riccati equation and the associated feedback gain.

use crate::error::{Error, Result};
use crate::linalg::eig::spectral_radius_estimate;
use crate::linalg::factor::solve_spd;
use crate::linalg::Matrix;

const RESIDUAL_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 100_000;

/// Solution of the DARE together with the optimal feedback gain.
#[derive(Debug, Clone)]
pub struct DareSolution {
    /// Fixed point P of P = A^T P A - A^T P B (B^T P B + R)^{-1} B^T P A + Q.
    pub cost: Matrix,
    /// Gain K = -(B^T P B + R)^{-1} B^T P A; the closed loop A + B K is stable.
    pub gain: Matrix,
}

/// Fixed-point Riccati recursion from P_0 = Q.
///
/// Converges for stabilizable (A, B); lack of stabilizability shows up as
/// non-convergence or an unstable closed loop, both reported as errors.
pub fn dare(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<DareSolution> {
    let n = a.rows();
    let m = b.cols();
    if !a.is_square() || b.rows() != n || q.rows() != n || !q.is_square() || r.rows() != m || !r.is_square() {
        return Err(Error::DimensionMismatch("dare operand shapes".into()));
    }
    if !r.is_symmetric(1e-10) || !q.is_symmetric(1e-10) {
        return Err(Error::InvalidInput("dare cost matrices must be symmetric".into()));
    }

    let at = a.transpose();
    let mut p = q.symmetrize();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let next = riccati_map(a, &at, b, q, r, &p)?;
        residual = (&next - &p).frobenius_norm();
        let done = residual <= RESIDUAL_TOL * p.frobenius_norm().max(1.0);
        p = next.symmetrize();
        if done {
            let gain = gain_from_cost(a, b, r, &p)?;
            let closed = a.add_scaled(&b.matmul(&gain), 1.0);
            let rho = spectral_radius_estimate(&closed);
            if rho >= 1.0 {
                return Err(Error::NonConvergence {
                    what: "dare closed-loop stability",
                    residual: rho,
                });
            }
            return Ok(DareSolution { cost: p, gain });
        }
    }
    Err(Error::NonConvergence {
        what: "dare fixed point",
        residual,
    })
}

fn riccati_map(
    a: &Matrix,
    at: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    p: &Matrix,
) -> Result<Matrix> {
    let pa = p.matmul(a);
    let pb = p.matmul(b);
    let inner = &b.tr_matmul(&pb) + r; // B^T P B + R, symmetric pd
    let solved = solve_spd(&inner.symmetrize(), &b.tr_matmul(&pa)).map_err(|_| {
        Error::InvalidInput("dare inner matrix B^T P B + R must be positive definite".into())
    })?;
    // A^T P A - A^T P B (B^T P B + R)^{-1} B^T P A + Q
    let quad = at.matmul(&pb).matmul(&solved);
    Ok(&(&at.matmul(&pa) - &quad) + q)
}

fn gain_from_cost(a: &Matrix, b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let pb = p.matmul(b);
    let inner = &b.tr_matmul(&pb) + r;
    let rhs = b.tr_matmul(&p.matmul(a));
    let solved = solve_spd(&inner.symmetrize(), &rhs).map_err(|_| {
        Error::InvalidInput("dare inner matrix B^T P B + R must be positive definite".into())
    })?;
    Ok(solved.scale(-1.0))
}

/// Residual of the DARE at p, for diagnostics and tests.
pub fn dare_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> f64 {
    let at = a.transpose();
    match riccati_map(a, &at, b, q, r, p) {
        Ok(next) => (&next - p).frobenius_norm(),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_dare_matches_quadratic_root() {
        // p = a^2 p - a^2 p^2 / (p + r) + q with a = 0.9, b = 1, q = r = 1.
        let a = Matrix::diag(&[0.9]);
        let b = Matrix::diag(&[1.0]);
        let q = Matrix::diag(&[1.0]);
        let r = Matrix::diag(&[1.0]);
        let sol = dare(&a, &b, &q, &r).unwrap();
        let p = sol.cost[(0, 0)];
        let res = (0.81 * p - 0.81 * p * p / (p + 1.0) + 1.0 - p).abs();
        assert!(res < 1e-10, "fixed point residual {res}");
        let k = sol.gain[(0, 0)];
        assert!((0.9 + k).abs() < 1.0, "closed loop unstable: {}", 0.9 + k);
    }

    #[test]
    fn zero_cost_gives_zero_solution() {
        let a = Matrix::diag(&[0.5, 0.3]);
        let b = Matrix::identity(2);
        let q = Matrix::zeros(2, 2);
        let r = Matrix::identity(2);
        let sol = dare(&a, &b, &q, &r).unwrap();
        assert!(sol.cost.max_abs() < 1e-12);
        assert!(sol.gain.max_abs() < 1e-12);
    }
}
