use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::bayes::misfit::ObservationSet;
use crate::error::{Error, Result};
use crate::forcing::EffectiveInputSeries;
use crate::io::fmt_f64;
use crate::model::{simulate, CatchmentMeta, ModelState};
use crate::params::PhysicalParams;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;

/// Default posterior band: the central 75%.
pub const DEFAULT_BAND: (f64, f64) = (0.125, 0.875);

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-day posterior discharge quantiles with the observation noise band.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBands {
    pub dates: Vec<NaiveDate>,
    pub obs: Option<Vec<f64>>,
    pub lo95: Option<Vec<f64>>,
    pub hi95: Option<Vec<f64>>,
    pub median: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub mean: Vec<f64>,
    pub band: (f64, f64),
    /// Ensemble members that were simulated.
    pub used: usize,
    /// Members whose simulation failed.
    pub skipped: usize,
}

impl QuantileBands {
    /// Fraction of days from `from` on where `truth` lies inside the
    /// posterior band.
    pub fn coverage(&self, truth: &[f64], from: usize) -> f64 {
        let days: Vec<usize> = (from..truth.len().min(self.lo.len())).collect();
        let hit = days
            .iter()
            .filter(|&&i| self.lo[i] <= truth[i] && truth[i] <= self.hi[i])
            .count();
        hit as f64 / days.len().max(1) as f64
    }

    /// `date,obs,lo95,hi95,post_median,post_lo,post_hi,post_mean`; the
    /// observation columns are empty without observations.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,obs,lo95,hi95,post_median,post_lo,post_hi,post_mean\n");
        let opt = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|v| fmt_f64(v[i])).unwrap_or_default();
        for i in 0..self.dates.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.dates[i],
                opt(&self.obs, i),
                opt(&self.lo95, i),
                opt(&self.hi95, i),
                fmt_f64(self.median[i]),
                fmt_f64(self.lo[i]),
                fmt_f64(self.hi[i]),
                fmt_f64(self.mean[i])
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_string(path, &self.to_csv())
    }
}

/// Simulates every ensemble member and reports per-day quantiles. Members
/// whose simulation fails are skipped and counted.
pub fn push_forward(
    ensemble: &[PhysicalParams],
    meta: &CatchmentMeta,
    input: &EffectiveInputSeries,
    obs: Option<&ObservationSet>,
    band: (f64, f64),
) -> Result<QuantileBands> {
    if ensemble.is_empty() {
        return Err(Error::InvalidInput("empty posterior ensemble".into()));
    }
    if !(0.0 <= band.0 && band.0 <= band.1 && band.1 <= 1.0) {
        return Err(Error::Config(format!("band quantiles {band:?} must satisfy 0 <= lo <= hi <= 1")));
    }
    if let Some(o) = obs {
        if o.len() != input.len() {
            return Err(Error::InvalidInput(format!(
                "forcing has {} days, observations {}",
                input.len(),
                o.len()
            )));
        }
    }
    let first = obs.map(|o| o.d[0]);
    let runs: Vec<Option<Vec<f64>>> = ensemble
        .par_iter()
        .map(|p| {
            let init = ModelState::initial(p, meta, first);
            simulate(p, meta, input, &init, false).ok().map(|s| s.total)
        })
        .collect();
    let sims: Vec<Vec<f64>> = runs.into_iter().flatten().collect();
    let skipped = ensemble.len() - sims.len();
    if sims.is_empty() {
        return Err(Error::Numerical("every ensemble member failed to simulate".into()));
    }
    if skipped > 0 {
        log::warn!("{skipped} of {} ensemble members failed to simulate", ensemble.len());
    }
    let n_days = input.len();
    let per_day: Vec<(f64, f64, f64, f64)> = (0..n_days)
        .into_par_iter()
        .map(|t| {
            let mut day: Vec<f64> = sims.iter().map(|s| s[t]).collect();
            let mean = day.iter().sum::<f64>() / day.len() as f64;
            day.sort_by(f64::total_cmp);
            (
                quantile_sorted(&day, 0.5),
                quantile_sorted(&day, band.0),
                quantile_sorted(&day, band.1),
                mean,
            )
        })
        .collect();
    let (lo95, hi95) = match obs {
        Some(o) => {
            let half: Vec<f64> = (0..n_days).map(|i| Z95 * o.sigma(i)).collect();
            (
                Some(o.d.iter().zip(&half).map(|(d, h)| d - h).collect()),
                Some(o.d.iter().zip(&half).map(|(d, h)| d + h).collect()),
            )
        }
        None => (None, None),
    };
    Ok(QuantileBands {
        dates: input.dates.clone(),
        obs: obs.map(|o| o.d.clone()),
        lo95,
        hi95,
        median: per_day.iter().map(|q| q.0).collect(),
        lo: per_day.iter().map(|q| q.1).collect(),
        hi: per_day.iter().map(|q| q.2).collect(),
        mean: per_day.iter().map(|q| q.3).collect(),
        band,
        used: sims.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert!((quantile_sorted(&s, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&s, 0.125) - 1.375).abs() < 1e-15);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }
}
