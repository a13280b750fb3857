//! Linear-attention laboratory for in-context autoregressive learning.
//!
//! Sequences follow `s_{t+1} = W s_t` with a context matrix `W` drawn per
//! sequence. The crate provides:
//!
//! * [`numerics`]: complex vectors/matrices, seeded sampling, finite
//!   differences and a Jacobi eigensolver.
//! * [`ar_process`]: context ensembles, sequence generation, token encodings
//!   and datasets.
//! * [`models`]: forward passes for the augmented, diagonal multi-head,
//!   full multi-head and positional-encoding-only attention models.
//! * [`closed_form`]: population losses, optimum families, the optimal
//!   gradient step and the positional-encoding Hessian.
//! * [`training`]: analytic gradients, optimizers and training loops.
//! * [`baselines`]: inner gradient descent, least-squares AR fits and the
//!   linear RNN.
//! * [`harness`]: seeded experiment drivers writing JSON, CSV and SVG.

pub mod ar_process;
pub mod baselines;
pub mod closed_form;
pub mod error;
pub mod harness;
pub mod models;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{CMatrix, CVector, Complex, Mat, Rng};
