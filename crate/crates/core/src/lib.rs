//! LuKARS karst spring model and an active-subspace Bayesian inversion
//! toolkit: gradient-based subspace identification, global sensitivities,
//! polynomial response surfaces, subspace Metropolis-Hastings and posterior
//! push-forward.

pub mod bayes;
pub mod error;
pub mod forcing;
pub(crate) mod io;
pub mod model;
pub mod params;
pub mod pipeline;
pub mod subspace;

pub use error::{Error, Result};
pub use forcing::{preprocess_forcing, EffectiveInputSeries, ForcingConfig, ForcingSeries, PetMethod};
pub use model::{simulate, CatchmentMeta, DischargeSeries, ModelState};
pub use params::{
    check_constraints, sample_prior, to_calibration, to_physical, CalibrationVector, HydrotopeParams,
    PhysicalParams, PriorSpec,
};

/// Number of calibrated hydrotopes.
pub const N_HYDROTOPES: usize = 3;
