//! Bayesian inversion in the active subspace: the data misfit, a kernel
//! estimate of the marginal prior, Metropolis-Hastings on the active
//! variables, chain diagnostics, inactive-variable sampling and the
//! posterior push-forward.

pub mod ensemble;
pub mod ess;
pub mod inactive;
pub mod kde;
pub mod mcmc;
pub mod misfit;
pub mod pushforward;
pub mod support;

pub use ess::{effective_sample_size, thin};
pub use inactive::{lift, sample_inactive, InactiveSettings, SliceBasis};
pub use kde::{estimate_marginal_prior, Bandwidth, DensityEstimate};
pub use mcmc::{metropolis, mh_active, ChainSettings, MarkovChain};
pub use misfit::{data_misfit, LukarsMisfit, ObservationSet};
pub use ensemble::{read_ensemble_physical, PosteriorEnsemble};
pub use pushforward::{push_forward, QuantileBands, DEFAULT_BAND};
pub use support::ProjectedBox;
