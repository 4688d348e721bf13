//! Deterministic dense linear algebra: orthonormalization, complements,
//! norms, Lyapunov/Riccati solvers, and structured random matrices.
//!
//! Everything here is a pure function of its inputs with deterministic
//! iteration order, so results are reproducible across runs and platforms.

mod eig;
mod expm;
mod factor;
mod lyapunov;
mod matrix;
mod qr;
mod riccati;

pub use eig::{
    singular_values, spectral_norm, spectral_radius_estimate, sym_eigen_extremes, sym_eigenvalues,
};
pub use expm::{matrix_exponential, random_rotation};
pub use factor::{
    cholesky, cholesky_cond, determinant, invert_lower, solve_lower, solve_lower_transposed,
    solve_spd, solve_with_factor,
};
pub use lyapunov::dlyap;
pub use matrix::{Matrix, OrthonormalRows};
pub use qr::{orthonormal_complement, orthonormalize_rows};
pub use riccati::{dare, dare_residual, DareSolution};
