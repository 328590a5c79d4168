use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::N_PARAMS;

/// Settings of the whole inversion pipeline. File paths given in a config
/// file are resolved relative to that file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub forcing: Option<PathBuf>,
    /// Precomputed effective input; replaces `forcing` when set.
    pub effective_input: Option<PathBuf>,
    pub forcing_config: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub catchment: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    /// Calibration vector CSV used by `simulate` (first row).
    pub params: Option<PathBuf>,
    /// Known truth (calibration vector CSV) for scoring.
    pub truth: Option<PathBuf>,
    pub ensemble: Option<PathBuf>,
    /// Directory holding previously computed subspace artifacts.
    pub subspace_dir: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub eta: f64,
    pub n_gradients: usize,
    pub fd_step: f64,
    pub k: usize,
    pub degree: usize,
    pub bootstrap: usize,
    /// Additional prior draws evaluated for the response surface only.
    pub surrogate_extra: usize,
    pub sensitivity_m: Option<usize>,
    pub prior_samples: usize,
    pub n_steps: usize,
    pub burn_in: usize,
    pub proposal_std: f64,
    pub tune: bool,
    /// Retained chain states; defaults to the effective sample size.
    pub ess_target: Option<usize>,
    pub n_z: usize,
    pub inactive_burn_in: usize,
    pub inactive_thin: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,

    pub years: usize,
    pub start_date: NaiveDate,
    /// Half-width of the box the synthetic truth is drawn from.
    pub truth_spread: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            forcing: None,
            effective_input: None,
            forcing_config: None,
            observations: None,
            catchment: None,
            prior: None,
            params: None,
            truth: None,
            ensemble: None,
            subspace_dir: None,
            out_dir: PathBuf::from("out"),
            eta: 0.05,
            n_gradients: 1000,
            fd_step: 1e-4,
            k: 4,
            degree: 4,
            bootstrap: 500,
            surrogate_extra: 0,
            sensitivity_m: None,
            prior_samples: 100_000,
            n_steps: 100_000,
            burn_in: 10_000,
            proposal_std: 0.005,
            tune: true,
            ess_target: None,
            n_z: 1,
            inactive_burn_in: 1000,
            inactive_thin: 10,
            band_lo: 0.125,
            band_hi: 0.875,
            seed: 0,
            workers: 0,
            years: 3,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date"),
            truth_spread: 0.6,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Config(format!("`{key}`: cannot parse `{v}`: {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got `{v}`"))),
    }
}

impl PipelineConfig {
    /// Sets one field from its textual form. Relative paths are joined to
    /// `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || {
            let p = PathBuf::from(value);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "forcing" => self.forcing = Some(path()),
            "effective_input" => self.effective_input = Some(path()),
            "forcing_config" => self.forcing_config = Some(path()),
            "observations" => self.observations = Some(path()),
            "catchment" => self.catchment = Some(path()),
            "prior" => self.prior = Some(path()),
            "params" => self.params = Some(path()),
            "truth" => self.truth = Some(path()),
            "ensemble" => self.ensemble = Some(path()),
            "subspace_dir" => self.subspace_dir = Some(path()),
            "out_dir" => self.out_dir = path(),
            "eta" => self.eta = parse_num(key, value)?,
            "n_gradients" => self.n_gradients = parse_num(key, value)?,
            "fd_step" => self.fd_step = parse_num(key, value)?,
            "k" => self.k = parse_num(key, value)?,
            "degree" => self.degree = parse_num(key, value)?,
            "bootstrap" => self.bootstrap = parse_num(key, value)?,
            "surrogate_extra" => self.surrogate_extra = parse_num(key, value)?,
            "sensitivity_m" => self.sensitivity_m = Some(parse_num(key, value)?),
            "prior_samples" => self.prior_samples = parse_num(key, value)?,
            "n_steps" => self.n_steps = parse_num(key, value)?,
            "burn_in" => self.burn_in = parse_num(key, value)?,
            "proposal_std" => self.proposal_std = parse_num(key, value)?,
            "tune" => self.tune = parse_bool(key, value)?,
            "ess_target" => self.ess_target = Some(parse_num(key, value)?),
            "n_z" => self.n_z = parse_num(key, value)?,
            "inactive_burn_in" => self.inactive_burn_in = parse_num(key, value)?,
            "inactive_thin" => self.inactive_thin = parse_num(key, value)?,
            "band_lo" => self.band_lo = parse_num(key, value)?,
            "band_hi" => self.band_hi = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "workers" => self.workers = parse_num(key, value)?,
            "years" => self.years = parse_num(key, value)?,
            "start_date" => {
                self.start_date = NaiveDate::parse_from_str(value, "%Y-%m-%d")
                    .map_err(|e| Error::Config(format!("`start_date`: {e}")))?
            }
            "truth_spread" => self.truth_spread = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let base = origin.parent().unwrap_or(Path::new("")).to_path_buf();
        let mut cfg = PipelineConfig::default();
        for (k, v, line) in crate::io::key_values(text, origin)? {
            cfg.set(&k, &v, &base).map_err(|e| Error::parse(origin, line, e.to_string()))?;
        }
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_gradients", self.n_gradients),
            ("degree", self.degree),
            ("bootstrap", self.bootstrap),
            ("prior_samples", self.prior_samples),
            ("n_steps", self.n_steps),
            ("n_z", self.n_z),
            ("inactive_thin", self.inactive_thin),
            ("years", self.years),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{name}` must be positive")));
            }
        }
        if self.k == 0 || self.k >= N_PARAMS {
            return Err(Error::Config(format!("subspace dimension k = {} must lie in 1..{N_PARAMS}", self.k)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("noise level eta = {} must be positive", self.eta)));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.5) {
            return Err(Error::Config(format!("fd_step = {} must lie in (0, 0.5)", self.fd_step)));
        }
        if self.burn_in >= self.n_steps {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than n_steps ({})",
                self.burn_in, self.n_steps
            )));
        }
        if !(self.proposal_std > 0.0) {
            return Err(Error::Config("proposal_std must be positive".into()));
        }
        if !(0.0 <= self.band_lo && self.band_lo < self.band_hi && self.band_hi <= 1.0) {
            return Err(Error::Config(format!("band [{}, {}] is not a quantile interval", self.band_lo, self.band_hi)));
        }
        if let Some(m) = self.sensitivity_m {
            if m == 0 || m > N_PARAMS {
                return Err(Error::Config(format!("sensitivity_m = {m} must lie in 1..={N_PARAMS}")));
            }
        }
        if !(self.truth_spread > 0.0 && self.truth_spread <= 1.0) {
            return Err(Error::Config("truth_spread must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Seed of a named stage: the first eight bytes of
    /// `SHA-256(root seed as little-endian u64 || label)`.
    pub fn stage_seed(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }
}

pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
