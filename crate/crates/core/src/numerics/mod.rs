//! Numerical substrate: complex arithmetic, dense matrices, seeded sampling,
//! finite-difference oracles and a symmetric eigensolver.

mod complex;
mod eig;
mod finite_diff;
mod matrix;
mod rng;
mod sampling;

pub use complex::{cpow, hdot, unit_complex, Complex};
pub use eig::{pinv_hermitian, sym_eig, SymEig, JACOBI_TOL};
pub use finite_diff::{finite_diff_grad, finite_diff_hessian, DEFAULT_FD_STEP};
pub use matrix::{CMatrix, CVector, Mat};
pub use rng::Rng;
pub use sampling::{haar_orthogonal, householder_qr, roots_of_unity_grid, sample_unit_complex};
