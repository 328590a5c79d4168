use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::forcing::{preprocess_forcing, EffectiveInputSeries, ForcingConfig, ForcingSeries};
use crate::model::{simulate, CatchmentMeta, DischargeSeries, ModelState, MM};
use crate::params::{to_physical, write_calibration_csv, CalibrationVector, PhysicalParams, PriorSpec, N_PARAMS};
use crate::pipeline::config::derive_seed;

/// Daily weather with a seasonal temperature cycle, a two-state wet/dry
/// chain for precipitation and occasional storms.
pub fn synthetic_forcing(start: NaiveDate, years: usize, seed: u64) -> Result<ForcingSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amount = Gamma::new(0.8, 9.0).expect("valid gamma");
    let storm = Exp::new(1.0 / 35.0).expect("valid rate");
    let end = start
        .with_year(start.year() + years as i32)
        .ok_or_else(|| Error::Config(format!("cannot add {years} years to {start}")))?;
    let n = (end - start).num_days() as usize;
    let (mut dates, mut precip, mut temp) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut wet, mut anomaly) = (false, 0.0);
    for i in 0..n {
        let date = start + Duration::days(i as i64);
        let phase = 2.0 * std::f64::consts::PI * (date.ordinal() as f64 - 105.0) / 365.25;
        anomaly = 0.7 * anomaly + 2.0 * rng.sample::<f64, _>(StandardNormal);
        temp.push(8.5 + 9.5 * phase.sin() + anomaly);
        let p_wet = if wet { 0.62 } else { 0.28 };
        wet = rng.random::<f64>() < p_wet;
        let mut p = if wet { amount.sample(&mut rng) * (1.0 + 0.3 * phase.sin()) } else { 0.0 };
        if rng.random::<f64>() < 0.012 {
            p += 30.0 + storm.sample(&mut rng);
        }
        dates.push(date);
        precip.push(p);
    }
    ForcingSeries::new(dates, precip, temp)
}

/// Data generated from a known parameter vector.
#[derive(Debug, Clone)]
pub struct SyntheticTwin {
    pub forcing: ForcingSeries,
    pub forcing_config: ForcingConfig,
    pub input: EffectiveInputSeries,
    pub meta: CatchmentMeta,
    pub truth: CalibrationVector,
    pub truth_physical: PhysicalParams,
    /// Noiseless model output with component traces.
    pub clean: DischargeSeries,
    /// Observations: the clean output with relative Gaussian noise.
    pub observed: Vec<f64>,
}

/// Baseflow-equilibrium discharge at the initial storages of `p`.
pub fn initial_discharge(p: &PhysicalParams, meta: &CatchmentMeta) -> f64 {
    (0..p.hydrotopes.len())
        .map(|i| p.hydrotopes[i].k_is * p.hydrotopes[i].e_min * meta.areas[i] * MM)
        .sum()
}

/// Generates forcing, draws a truth uniformly from `[-s, s]^21` (or uses
/// `truth`), simulates it and perturbs the output by `eta` relative noise.
pub fn generate_twin(
    start: NaiveDate,
    years: usize,
    eta: f64,
    truth_spread: f64,
    truth: Option<CalibrationVector>,
    prior: &PriorSpec,
    seed: u64,
) -> Result<SyntheticTwin> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("noise level {eta} must be >= 0")));
    }
    let forcing = synthetic_forcing(start, years, derive_seed(seed, "synthetic-forcing"))?;
    let forcing_config = ForcingConfig::default();
    let input = preprocess_forcing(&forcing, &forcing_config)?;
    let meta = CatchmentMeta::synthetic_default();
    let truth = match truth {
        Some(t) => t,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synthetic-truth"));
            let mut x = [0.0; N_PARAMS];
            for v in &mut x {
                *v = rng.random_range(-truth_spread..=truth_spread);
            }
            CalibrationVector::new(x)?
        }
    };
    let truth_physical = to_physical(&truth, prior)?;
    let init = ModelState::initial(&truth_physical, &meta, Some(initial_discharge(&truth_physical, &meta)));
    let clean = simulate(&truth_physical, &meta, &input, &init, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synthetic-noise"));
    let observed = clean
        .total
        .iter()
        .map(|q| (q * (1.0 + eta * rng.sample::<f64, _>(StandardNormal))).max(0.0))
        .collect();
    Ok(SyntheticTwin {
        forcing,
        forcing_config,
        input,
        meta,
        truth,
        truth_physical,
        clean,
        observed,
    })
}

impl SyntheticTwin {
    pub fn observations(&self) -> DischargeSeries {
        DischargeSeries {
            dates: self.clean.dates.clone(),
            total: self.observed.clone(),
            components: None,
        }
    }

    /// Writes the dataset and a pipeline config pointing at it.
    pub fn write(&self, dir: &Path, eta: f64, seed: u64) -> Result<()> {
        self.forcing.write_csv(dir.join("forcing.csv"))?;
        crate::io::write_string(dir.join("forcing.cfg"), &self.forcing_config.to_text())?;
        crate::io::write_string(dir.join("catchment.cfg"), &self.meta.to_text())?;
        self.observations().write_csv(dir.join("observations.csv"))?;
        self.clean.write_csv(dir.join("truth_discharge.csv"))?;
        write_calibration_csv(dir.join("truth.csv"), std::slice::from_ref(&self.truth))?;
        let cfg = format!(
            "forcing = forcing.csv\nforcing_config = forcing.cfg\ncatchment = catchment.cfg\n\
             observations = observations.csv\ntruth = truth.csv\nparams = truth.csv\neta = {eta}\nseed = {seed}\n"
        );
        crate::io::write_string(dir.join("twin.cfg"), &cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 1, 1).unwrap()
    }

    #[test]
    fn forcing_is_seasonal_and_seeded() {
        let f = synthetic_forcing(start(), 3, 1).unwrap();
        assert_eq!(f.len(), 1096);
        assert_eq!(f, synthetic_forcing(start(), 3, 1).unwrap());
        let mean_month = |m: u32| {
            let v: Vec<f64> = f.dates().iter().zip(f.temp()).filter(|(d, _)| d.month() == m).map(|(_, t)| *t).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean_month(7) > mean_month(1) + 12.0);
        let annual = f.precip().iter().sum::<f64>() / 3.0;
        assert!((900.0..2200.0).contains(&annual), "{annual}");
    }

    #[test]
    fn noiseless_twin_reproduces_the_simulation() {
        let t = generate_twin(start(), 1, 0.0, 0.6, None, &PriorSpec::kerschbaum(), 3).unwrap();
        assert_eq!(t.observed, t.clean.total);
    }

    #[test]
    fn noise_has_the_requested_size() {
        let t = generate_twin(start(), 3, 0.05, 0.6, None, &PriorSpec::kerschbaum(), 4).unwrap();
        let rel: Vec<f64> = t.observed.iter().zip(&t.clean.total).map(|(o, c)| o / c - 1.0).collect();
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        let sd = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rel.len() - 1) as f64).sqrt();
        assert!((sd - 0.05).abs() < 0.05 * 0.05, "{sd}");
    }
}
