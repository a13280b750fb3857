//! Analytic losses, optimum families, constraint certificates and the
//! positional-encoding Hessian.

mod losses;
mod optima;
mod pe;

pub use losses::{
    augmented_reduced_loss, eta_star, quadratic_loss, restricted_optimum_loss,
    structured_aug_coefficients, AugCoefficients,
};
pub use optima::{
    check_optimum, j_block_distance, j_block_parameter, orthogonal_optimum, unitary_optimum,
    ConstraintResiduals, OptimumFamily, OptimumParams,
};
pub use pe::{pe_cross_term, pe_hessian, pe_loss_and_grad};
