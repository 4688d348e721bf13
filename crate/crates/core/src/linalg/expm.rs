//! Matrix exponential and seeded random rotations.

use crate::linalg::Matrix;
use crate::rng::DetRng;

/// exp(S) by scaling-and-squaring with a Taylor series on the scaled block.
///
/// Truncation error is far below 1e-12 relative for ||S|| <= 10: the input is
/// scaled until its norm is at most 1/2 and terms are added until they fall
/// under 1e-20 of the running sum.
pub fn matrix_exponential(s: &Matrix) -> Matrix {
    assert!(s.is_square(), "matrix exponential of non-square matrix");
    let n = s.rows();
    let norm = s.frobenius_norm();
    let squarings = if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as u32
    };
    let scaled = s.scale(0.5f64.powi(squarings as i32));

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=60 {
        term = term.matmul(&scaled).scale(1.0 / k as f64);
        sum = &sum + &term;
        if term.frobenius_norm() <= 1e-20 * sum.frobenius_norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Orthogonal rotation exp((L - L^T)/2) with L = gamma * S and S a seeded
/// standard-normal matrix. gamma = 0 gives the identity exactly; the result
/// always has determinant +1 since the exponent is skew-symmetric.
pub fn random_rotation(d: usize, gamma: f64, seed: u64) -> Matrix {
    assert!(gamma >= 0.0, "rotation scale must be nonnegative");
    if gamma == 0.0 {
        return Matrix::identity(d);
    }
    let mut rng = DetRng::new(seed);
    let s = rng.normal_matrix(d, d);
    let l = s.scale(gamma);
    let skew = (&l - &l.transpose()).scale(0.5);
    matrix_exponential(&skew)
}
