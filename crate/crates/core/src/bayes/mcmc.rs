use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bayes::kde::DensityEstimate;
use crate::error::{Error, Result};
use crate::subspace::PolySurrogate;

/// Acceptance rate the burn-in tuner aims for.
pub const TARGET_ACCEPTANCE: f64 = 0.35;

/// Random-walk Metropolis-Hastings settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSettings {
    /// Total number of proposals, burn-in included.
    pub n_steps: usize,
    pub burn_in: usize,
    /// Initial (or fixed, without tuning) proposal standard deviation.
    pub proposal_std: f64,
    /// Adapt the proposal during burn-in, then freeze it.
    pub tune: bool,
}

impl ChainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_steps {
            return Err(Error::Config(format!(
                "burn-in ({}) must be shorter than the chain ({} steps)",
                self.burn_in, self.n_steps
            )));
        }
        if !(self.proposal_std > 0.0 && self.proposal_std.is_finite()) {
            return Err(Error::Config(format!("proposal std {} must be positive", self.proposal_std)));
        }
        Ok(())
    }
}

/// Post-burn-in states of a Metropolis-Hastings chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub states: Vec<Vec<f64>>,
    /// Accepted proposals after burn-in.
    pub accepted: usize,
    pub burn_in: usize,
    /// Proposal standard deviation used after burn-in.
    pub proposal_std: f64,
    pub burn_in_acceptance: f64,
}

impl MarkovChain {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.states.len().max(1) as f64
    }
}

/// Gaussian random-walk Metropolis-Hastings on an unnormalised log density.
///
/// During burn-in and with `tune` set, `ln σ` follows a Robbins-Monro
/// recursion driven by the acceptance probability toward
/// [`TARGET_ACCEPTANCE`].
pub fn metropolis<F>(log_target: F, start: &[f64], settings: &ChainSettings, seed: u64) -> Result<MarkovChain>
where
    F: Fn(&[f64]) -> f64,
{
    settings.validate()?;
    let mut current = start.to_vec();
    let mut lp = log_target(&current);
    if lp == f64::NEG_INFINITY || lp.is_nan() {
        return Err(Error::InvalidInput(format!(
            "target density vanishes at the start point {start:?}; choose another start"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_sigma = settings.proposal_std.ln();
    let mut proposal = vec![0.0; start.len()];
    let mut states = Vec::with_capacity(settings.n_steps - settings.burn_in);
    let (mut accepted, mut burn_accepted) = (0usize, 0usize);
    for step in 0..settings.n_steps {
        let sigma = log_sigma.exp();
        for (p, c) in proposal.iter_mut().zip(&current) {
            *p = c + sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let lp_new = log_target(&proposal);
        let delta = lp_new - lp;
        let u: f64 = rng.random();
        let accept = !lp_new.is_nan() && u.ln() <= delta;
        if accept {
            current.copy_from_slice(&proposal);
            lp = lp_new;
        }
        if step < settings.burn_in {
            burn_accepted += accept as usize;
            if settings.tune {
                let prob = if delta.is_nan() { 0.0 } else { delta.min(0.0).exp() };
                log_sigma += (prob - TARGET_ACCEPTANCE) / ((step + 1) as f64).powf(0.6);
            }
        } else {
            accepted += accept as usize;
            states.push(current.clone());
        }
    }
    Ok(MarkovChain {
        states,
        accepted,
        burn_in: settings.burn_in,
        proposal_std: log_sigma.exp(),
        burn_in_acceptance: burn_accepted as f64 / settings.burn_in.max(1) as f64,
    })
}

/// Samples `exp(-G(y)) ρ̂(y)` in the active subspace.
pub fn mh_active(
    surrogate: &PolySurrogate,
    prior: &DensityEstimate,
    start: &[f64],
    settings: &ChainSettings,
    seed: u64,
) -> Result<MarkovChain> {
    if start.len() != surrogate.dim || prior.dim() != surrogate.dim {
        return Err(Error::InvalidInput(format!(
            "start of dimension {}, surrogate {}, prior {}",
            start.len(),
            surrogate.dim,
            prior.dim()
        )));
    }
    metropolis(|y| -surrogate.eval(y) + prior.ln_eval(y), start, settings, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(n: usize, burn: usize, tune: bool) -> ChainSettings {
        ChainSettings {
            n_steps: n,
            burn_in: burn,
            proposal_std: 0.5,
            tune,
        }
    }

    #[test]
    fn flat_target_accepts_everything() {
        let chain = metropolis(|_| 1.0, &[0.0, 0.0], &settings(2000, 100, false), 1).unwrap();
        assert_eq!(chain.accepted, 1900);
        assert_eq!(chain.states.len(), 1900);
    }

    #[test]
    fn reproducible_per_seed() {
        let f = |y: &[f64]| -0.5 * y[0] * y[0];
        let a = metropolis(f, &[0.0], &settings(5000, 500, true), 9).unwrap();
        let b = metropolis(f, &[0.0], &settings(5000, 500, true), 9).unwrap();
        let c = metropolis(f, &[0.0], &settings(5000, 500, true), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn tuner_lands_in_band_for_narrow_target() {
        // posterior width comparable to the default step of 0.005
        let f = |y: &[f64]| -0.5 * (y[0] / 0.004).powi(2) - 0.5 * (y[1] / 0.01).powi(2);
        let chain = metropolis(f, &[0.0, 0.0], &settings(40_000, 10_000, true), 3).unwrap();
        let rate = chain.acceptance_rate();
        assert!((0.2..=0.5).contains(&rate), "acceptance {rate}");
        assert!(chain.proposal_std < 0.05);
    }

    #[test]
    fn rejects_bad_start_and_config() {
        assert!(metropolis(|_| f64::NEG_INFINITY, &[0.0], &settings(10, 1, false), 0).is_err());
        assert!(metropolis(|_| 0.0, &[0.0], &settings(10, 10, false), 0).is_err());
    }
}
