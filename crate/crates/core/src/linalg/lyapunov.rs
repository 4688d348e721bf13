//! Discrete Lyapunov equation solver.

use crate::error::{Error, Result};
use crate::linalg::eig::spectral_radius_estimate;
use crate::linalg::Matrix;

const STABILITY_MARGIN: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 200;

/// Solve sigma = a sigma a^T + q for stable a (spectral radius < 1) and
/// symmetric psd q, by Smith doubling:
///
///   sigma_{k+1} = sigma_k + a_k sigma_k a_k^T,  a_{k+1} = a_k a_k,
///
/// which sums the series sum_j a^j q (a^T)^j quadratically fast.
pub fn dlyap(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    if !a.is_square() || !q.is_square() || a.rows() != q.rows() {
        return Err(Error::DimensionMismatch(format!(
            "dlyap needs square a and q of equal size, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            q.rows(),
            q.cols()
        )));
    }
    if !q.is_symmetric(1e-10) {
        return Err(Error::InvalidInput("dlyap forcing term must be symmetric".into()));
    }
    let rho = spectral_radius_estimate(a);
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::Unstable { rho_estimate: rho });
    }

    let mut sigma = q.symmetrize();
    let mut apow = a.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        residual = lyap_residual(a, &sigma, q);
        if residual <= RESIDUAL_TOL * sigma.frobenius_norm().max(1.0) {
            return Ok(sigma.symmetrize());
        }
        sigma = &sigma + &apow.matmul(&sigma).matmul(&apow.transpose());
        apow = apow.matmul(&apow);
        if !sigma.has_finite_entries() {
            return Err(Error::Unstable { rho_estimate: rho });
        }
    }
    Err(Error::NonConvergence {
        what: "dlyap doubling",
        residual,
    })
}

fn lyap_residual(a: &Matrix, sigma: &Matrix, q: &Matrix) -> f64 {
    let recon = &a.matmul(sigma).matmul(&a.transpose()) + q;
    (sigma - &recon).frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::DetRng;

    #[test]
    fn zero_dynamics_returns_forcing() {
        let q = Matrix::diag(&[2.0, 3.0]);
        let sigma = dlyap(&Matrix::zeros(2, 2), &q).unwrap();
        assert!((&sigma - &q).max_abs() < 1e-12);
    }

    #[test]
    fn scalar_closed_form() {
        let a = Matrix::diag(&[0.5]);
        let q = Matrix::diag(&[1.0]);
        let sigma = dlyap(&a, &q).unwrap();
        assert!((sigma[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_dynamics_rejected() {
        let a = Matrix::diag(&[1.01, 0.2]);
        assert!(matches!(
            dlyap(&a, &Matrix::identity(2)),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn asymmetric_forcing_rejected() {
        let q = Matrix::new(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(dlyap(&Matrix::zeros(2, 2), &q).is_err());
    }

    #[test]
    fn random_stable_instance_residual() {
        let mut rng = DetRng::new(21);
        let raw = rng.normal_matrix(4, 4);
        let a = raw.scale(0.8 / spectral_radius_estimate(&raw).max(1e-9));
        let g = rng.normal_matrix(4, 4);
        let q = g.tr_matmul(&g);
        let sigma = dlyap(&a, &q).unwrap();
        let recon = &a.matmul(&sigma).matmul(&a.transpose()) + &q;
        let res = (&sigma - &recon).frobenius_norm();
        assert!(res <= 1e-10 * sigma.frobenius_norm().max(1.0), "residual {res}");
    }
}
