//! Active-subspace estimation: finite-difference gradients of a scalar
//! misfit, the averaged gradient outer-product matrix, its sorted spectrum
//! with bootstrap bands, activity-score sensitivities and a polynomial
//! response surface on the active variables.

mod gradient;
mod spectrum;
mod surrogate;

pub use gradient::{
    gradient_sweep, misfit_gradient, recommended_sample_count, EvalCounter, GradientSample, GradientSweep,
    MAX_FAILURE_RATE,
};
pub use spectrum::{
    bootstrap_bands, c_matrix_from_gradients, decompose, estimate_c_matrix, global_sensitivities, sorted_eigen,
    Sensitivities, SubspaceDecomposition,
};
pub use surrogate::{
    coefficient_count, fit_response_surface, monomial_exponents, r_squared, PolySurrogate, HOLDOUT_FRACTION,
};
