use crate::error::{Error, Result};
use crate::forcing::EffectiveInputSeries;
use crate::model::{simulate, CatchmentMeta, ModelState};
use crate::params::{to_physical, CalibrationVector, PriorSpec};
use crate::subspace::EvalCounter;

/// Noise-floor fraction of the median discharge guarding near-zero days.
pub const NOISE_FLOOR_FRACTION: f64 = 0.01;

/// Discharge observations with a relative Gaussian noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub d: Vec<f64>,
    pub eta: f64,
    /// Leading days excluded from the misfit.
    pub warmup: usize,
    gamma: Vec<f64>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

impl ObservationSet {
    /// `Γ_ii = (η · max(d_i, 0.01 · median(d)))²`.
    pub fn new(d: Vec<f64>, eta: f64, warmup: usize) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Config(format!("noise level {eta} must be positive")));
        }
        if d.is_empty() {
            return Err(Error::InvalidInput("no observations".into()));
        }
        if let Some(i) = d.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!("observation {i} is {} (must be finite and >= 0)", d[i])));
        }
        if warmup >= d.len() {
            return Err(Error::Config(format!(
                "warm-up of {warmup} days leaves none of the {} observations",
                d.len()
            )));
        }
        let floor = NOISE_FLOOR_FRACTION * median(&d);
        if floor <= 0.0 {
            return Err(Error::InvalidInput("median discharge is zero; noise model undefined".into()));
        }
        let gamma = d.iter().map(|v| (eta * v.max(floor)).powi(2)).collect();
        Ok(ObservationSet { d, eta, warmup, gamma })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Diagonal of the noise covariance.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Noise standard deviation of day `i`.
    pub fn sigma(&self, i: usize) -> f64 {
        self.gamma[i].sqrt()
    }

    /// `½ Σ (d_i - sim_i)² / Γ_ii` over post-warm-up days. Non-finite if any
    /// simulated value is.
    pub fn misfit(&self, sim: &[f64]) -> Result<f64> {
        if sim.len() != self.d.len() {
            return Err(Error::InvalidInput(format!(
                "simulation has {} days, observations {}",
                sim.len(),
                self.d.len()
            )));
        }
        let mut acc = 0.0;
        for i in self.warmup..self.d.len() {
            acc += (self.d[i] - sim[i]).powi(2) / self.gamma[i];
        }
        Ok(0.5 * acc)
    }
}

/// The data misfit of LuKARS against observations as a function of the
/// calibration vector. Counts every forward evaluation.
pub struct LukarsMisfit<'a> {
    pub prior: &'a PriorSpec,
    pub meta: &'a CatchmentMeta,
    pub input: &'a EffectiveInputSeries,
    pub obs: &'a ObservationSet,
    counter: EvalCounter,
}

impl<'a> LukarsMisfit<'a> {
    pub fn new(
        prior: &'a PriorSpec,
        meta: &'a CatchmentMeta,
        input: &'a EffectiveInputSeries,
        obs: &'a ObservationSet,
    ) -> Result<Self> {
        if input.len() != obs.len() {
            return Err(Error::InvalidInput(format!(
                "forcing has {} days, observations {}",
                input.len(),
                obs.len()
            )));
        }
        meta.validate()?;
        Ok(LukarsMisfit {
            prior,
            meta,
            input,
            obs,
            counter: EvalCounter::new(),
        })
    }

    /// Simulated spring discharge (m³/d) at calibration coordinates `x`.
    pub fn discharge(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.counter.add(1);
        let cv = CalibrationVector::from_slice(x)?;
        let p = to_physical(&cv, self.prior)?;
        let init = ModelState::initial(&p, self.meta, Some(self.obs.d[0]));
        Ok(simulate(&p, self.meta, self.input, &init, false)?.total)
    }

    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        let sim = self.discharge(x)?;
        self.obs.misfit(&sim)
    }

    /// Misfit value; NaN when the model cannot be evaluated.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }

    pub fn evaluations(&self) -> u64 {
        self.counter.get()
    }
}

/// `data_misfit` for a single calibration vector.
pub fn data_misfit(x: &CalibrationVector, misfit: &LukarsMisfit<'_>) -> Result<f64> {
    misfit.try_eval(x.as_slice())
}
