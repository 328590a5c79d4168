use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::bayes::ensemble::moments;
use crate::bayes::{
    effective_sample_size, estimate_marginal_prior, mh_active, push_forward, read_ensemble_physical, thin, Bandwidth,
    ChainSettings, InactiveSettings, LukarsMisfit, ObservationSet, PosteriorEnsemble, QuantileBands, SliceBasis,
};
use crate::error::{Error, Result};
use crate::forcing::{preprocess_forcing, EffectiveInputSeries, ForcingConfig, ForcingSeries};
use crate::io::fmt_f64;
use crate::model::{nse, simulate, CatchmentMeta, DischargeSeries, ModelState};
use crate::params::{
    read_calibration_csv, sample_prior, to_physical, CalibrationVector, PriorSpec, CALIBRATION_NAMES, N_PARAMS,
    PHYSICAL_NAMES,
};
use crate::pipeline::config::{derive_seed, PipelineConfig};
use crate::pipeline::ledger::RunLedger;
use crate::pipeline::synthetic::generate_twin;
use crate::subspace::{
    bootstrap_bands, decompose, estimate_c_matrix, fit_response_surface, global_sensitivities, gradient_sweep,
    GradientSample, PolySurrogate, Sensitivities, SubspaceDecomposition,
};

pub const GRADIENTS_FILE: &str = "gradient_samples.csv";
pub const EIGENVALUES_FILE: &str = "eigenvalues.csv";
pub const EIGENVECTORS_FILE: &str = "eigenvectors.csv";
pub const SENSITIVITIES_FILE: &str = "sensitivities.csv";
pub const SURROGATE_FILE: &str = "surrogate.csv";
pub const ENSEMBLE_FILE: &str = "ensemble.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const BANDS_FILE: &str = "bands.csv";
pub const DISCHARGE_FILE: &str = "discharge.csv";

/// Model inputs shared by every command.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub prior: PriorSpec,
    pub meta: CatchmentMeta,
    pub input: EffectiveInputSeries,
    pub warmup: usize,
    pub obs: Option<ObservationSet>,
}

impl Inputs {
    pub fn load(cfg: &PipelineConfig, require_obs: bool) -> Result<Self> {
        let prior = match &cfg.prior {
            Some(p) => PriorSpec::read(p)?,
            None => PriorSpec::kerschbaum(),
        };
        let meta = match &cfg.catchment {
            Some(p) => CatchmentMeta::read(p)?,
            None => return Err(Error::Config("a catchment file is required (key `catchment`)".into())),
        };
        let fcfg = match &cfg.forcing_config {
            Some(p) => ForcingConfig::read(p)?,
            None => ForcingConfig::default(),
        };
        let input = match (&cfg.effective_input, &cfg.forcing) {
            (Some(p), _) => EffectiveInputSeries::read_csv(p)?,
            (None, Some(p)) => preprocess_forcing(&ForcingSeries::read_csv(p)?, &fcfg)?,
            (None, None) => {
                return Err(Error::Config("no model input: set `forcing` or `effective_input`".into()))
            }
        };
        let obs = match &cfg.observations {
            Some(p) => {
                let series = DischargeSeries::read_csv(p)?;
                if series.dates != input.dates {
                    return Err(Error::InvalidInput(format!(
                        "{} covers {} days from {:?}, the forcing {} days from {:?}",
                        p.display(),
                        series.len(),
                        series.dates.first(),
                        input.len(),
                        input.dates.first()
                    )));
                }
                Some(ObservationSet::new(series.total, cfg.eta, fcfg.warmup_days)?)
            }
            None if require_obs => {
                return Err(Error::Config("observations are required (key `observations`)".into()))
            }
            None => None,
        };
        Ok(Inputs {
            prior,
            meta,
            input,
            warmup: fcfg.warmup_days,
            obs,
        })
    }

    pub fn misfit(&self) -> Result<LukarsMisfit<'_>> {
        let obs = self
            .obs
            .as_ref()
            .ok_or_else(|| Error::Config("observations are required (key `observations`)".into()))?;
        LukarsMisfit::new(&self.prior, &self.meta, &self.input, obs)
    }
}

fn first_row(path: &Path) -> Result<CalibrationVector> {
    read_calibration_csv(path)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::parse(path, 2, "no parameter rows"))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    crate::io::write_string(path, &(serde_json::to_string_pretty(value).expect("json value serializes") + "\n"))
}

/// Result of `simulate`.
#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub discharge: DischargeSeries,
    pub path: PathBuf,
    /// Efficiency against the observations after warm-up.
    pub nse: Option<f64>,
}

pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<SimulateReport> {
    let inputs = Inputs::load(cfg, false)?;
    let params = cfg
        .params
        .as_ref()
        .ok_or_else(|| Error::Config("a parameter file is required (key `params`)".into()))?;
    let p = to_physical(&first_row(params)?, &inputs.prior)?;
    let init = ModelState::initial(&p, &inputs.meta, inputs.obs.as_ref().map(|o| o.d[0]));
    let discharge = simulate(&p, &inputs.meta, &inputs.input, &init, true)?;
    let path = cfg.out_dir.join(DISCHARGE_FILE);
    discharge.write_csv(&path)?;
    let nse = match &inputs.obs {
        Some(o) => Some(nse(&discharge.total[o.warmup..], &o.d[o.warmup..])?),
        None => None,
    };
    Ok(SimulateReport { discharge, path, nse })
}

/// Gradient samples and the decomposition built from them.
#[derive(Debug, Clone)]
pub struct SubspaceArtifacts {
    pub samples: Vec<GradientSample>,
    pub decomposition: SubspaceDecomposition,
    pub sensitivities: Sensitivities,
    pub failed: usize,
    pub evaluations: u64,
    pub truth_misfit: Option<f64>,
}

fn gradients_csv(samples: &[GradientSample]) -> String {
    let mut header: Vec<String> = CALIBRATION_NAMES.iter().map(|s| s.to_string()).collect();
    header.push("misfit".into());
    header.extend(CALIBRATION_NAMES.iter().map(|s| format!("g_{s}")));
    let mut out = header.join(",");
    out.push('\n');
    for s in samples {
        let row: Vec<String> = s.x.iter().chain([&s.f]).chain(&s.g).map(|v| fmt_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_gradient_samples(path: &Path) -> Result<Vec<GradientSample>> {
    let grads: Vec<String> = CALIBRATION_NAMES.iter().map(|s| format!("g_{s}")).collect();
    let mut required: Vec<&str> = CALIBRATION_NAMES.to_vec();
    required.push("misfit");
    required.extend(grads.iter().map(String::as_str));
    let table = crate::io::read_table(path, &required)?;
    table
        .rows
        .iter()
        .map(|row| {
            let v = (0..2 * N_PARAMS + 1).map(|i| row.float(path, i)).collect::<Result<Vec<f64>>>()?;
            Ok(GradientSample {
                x: v[..N_PARAMS].to_vec(),
                f: v[N_PARAMS],
                g: v[N_PARAMS + 1..].to_vec(),
            })
        })
        .collect()
}

fn sensitivities_csv(s: &Sensitivities) -> String {
    let mut out = String::from("param,sensitivity,normalized\n");
    for (i, name) in CALIBRATION_NAMES.iter().enumerate() {
        out.push_str(&format!("{name},{},{}\n", fmt_f64(s.raw[i]), fmt_f64(s.normalized[i])));
    }
    out
}

fn eigen_table(d: &SubspaceDecomposition) -> Vec<Value> {
    d.eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let band = d.bands.as_ref().map(|b| json!([b[i].0, b[i].1]));
            json!({"index": i + 1, "eigenvalue": l, "band": band})
        })
        .collect()
}

/// Gradient sweep, decomposition, bootstrap bands and sensitivities. Writes
/// the subspace artifacts to `out_dir`.
pub fn run_subspace(cfg: &PipelineConfig, inputs: &Inputs, ledger: &mut RunLedger) -> Result<SubspaceArtifacts> {
    cfg.validate()?;
    let misfit = inputs.misfit()?;
    let started = Instant::now();
    let seed = cfg.stage_seed("gradients");
    ledger.seed("gradients", seed);
    let points: Vec<Vec<f64>> = sample_prior(cfg.n_gradients, seed).into_iter().map(|x| x.0.to_vec()).collect();
    let sweep = gradient_sweep(&points, &|x: &[f64]| misfit.eval(x), cfg.fd_step)?;
    let evaluations = misfit.evaluations();
    ledger.record("gradients", evaluations, Some(sweep.evaluations), started);

    let started = Instant::now();
    let c = estimate_c_matrix(&sweep.samples)?;
    let mut decomposition = decompose(&c, cfg.k)?;
    let bseed = cfg.stage_seed("bootstrap");
    ledger.seed("bootstrap", bseed);
    decomposition.bands = Some(bootstrap_bands(&sweep.samples, cfg.bootstrap, bseed)?);
    let m = cfg.sensitivity_m.unwrap_or(cfg.k);
    let sensitivities = global_sensitivities(&decomposition.eigenvalues, &decomposition.eigenvectors, m)?;
    ledger.record("decomposition", 0, Some(0), started);

    let truth_misfit = match &cfg.truth {
        Some(p) => Some(misfit.try_eval(first_row(p)?.as_slice())?),
        None => None,
    };

    let dir = &cfg.out_dir;
    let files = [
        (dir.join(GRADIENTS_FILE), gradients_csv(&sweep.samples)),
        (dir.join(SENSITIVITIES_FILE), sensitivities_csv(&sensitivities)),
    ];
    for (path, text) in &files {
        crate::io::write_string(path, text)?;
        ledger.artifact(path)?;
    }
    let (pv, pw) = (dir.join(EIGENVALUES_FILE), dir.join(EIGENVECTORS_FILE));
    decomposition.write(&pv, &pw, &CALIBRATION_NAMES)?;
    ledger.artifact(&pv)?;
    ledger.artifact(&pw)?;
    let report = json!({
        "gradient_samples": sweep.samples.len(),
        "failed_samples": sweep.failed.len(),
        "forward_evaluations": evaluations,
        "eigenvalues": eigen_table(&decomposition),
        "sensitivities": CALIBRATION_NAMES.iter().enumerate()
            .map(|(i, n)| json!({"param": n, "normalized": sensitivities.normalized[i]}))
            .collect::<Vec<_>>(),
        "truth_misfit": truth_misfit,
    });
    let path = dir.join("subspace.json");
    write_json(&path, &report)?;
    ledger.artifact(&path)?;
    Ok(SubspaceArtifacts {
        samples: sweep.samples,
        decomposition,
        sensitivities,
        failed: sweep.failed.len(),
        evaluations,
        truth_misfit,
    })
}

pub fn cmd_subspace(cfg: &PipelineConfig) -> Result<(SubspaceArtifacts, RunLedger)> {
    let inputs = Inputs::load(cfg, true)?;
    let mut ledger = RunLedger::new("subspace");
    let out = run_subspace(cfg, &inputs, &mut ledger)?;
    ledger.write(cfg.out_dir.join("subspace_ledger.json"))?;
    Ok((out, ledger))
}

/// Result of `invert`.
#[derive(Debug, Clone)]
pub struct InvertReport {
    pub ensemble: PosteriorEnsemble,
    pub decomposition: SubspaceDecomposition,
    pub surrogate: PolySurrogate,
    pub acceptance_rate: f64,
    pub proposal_std: f64,
    pub chain_length: usize,
    pub infeasible: usize,
    /// Mean and standard deviation of the active chain, per coordinate.
    pub active_posterior: Vec<(f64, f64)>,
    /// The same for the marginal-prior reference draws.
    pub active_prior: Vec<(f64, f64)>,
    pub diagnostics: Value,
}

fn load_or_run_subspace(
    cfg: &PipelineConfig,
    inputs: &Inputs,
    ledger: &mut RunLedger,
) -> Result<(Vec<GradientSample>, SubspaceDecomposition)> {
    match &cfg.subspace_dir {
        Some(dir) => {
            let samples = read_gradient_samples(&dir.join(GRADIENTS_FILE))?;
            let d = SubspaceDecomposition::read(dir.join(EIGENVALUES_FILE), dir.join(EIGENVECTORS_FILE), cfg.k)?;
            Ok((samples, d))
        }
        None => {
            let a = run_subspace(cfg, inputs, ledger)?;
            Ok((a.samples, a.decomposition))
        }
    }
}

/// Response surface, active-variable chain, inactive sampling and lifting.
pub fn cmd_invert(cfg: &PipelineConfig) -> Result<(InvertReport, RunLedger)> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg, true)?;
    let mut ledger = RunLedger::new("invert");
    let (samples, decomposition) = load_or_run_subspace(cfg, &inputs, &mut ledger)?;
    if decomposition.dim() != N_PARAMS {
        return Err(Error::InvalidInput(format!("decomposition of dimension {}", decomposition.dim())));
    }
    let w1: DMatrix<f64> = decomposition.w1();
    let misfit = inputs.misfit()?;

    let started = Instant::now();
    let mut xs: Vec<Vec<f64>> = samples.iter().map(|s| s.x.clone()).collect();
    let mut fs: Vec<f64> = samples.iter().map(|s| s.f).collect();
    if cfg.surrogate_extra > 0 {
        let eseed = cfg.stage_seed("surrogate-samples");
        ledger.seed("surrogate-samples", eseed);
        let extra: Vec<Vec<f64>> =
            sample_prior(cfg.surrogate_extra, eseed).into_iter().map(|x| x.0.to_vec()).collect();
        let values: Vec<f64> = extra.par_iter().map(|x| misfit.eval(x)).collect();
        for (x, f) in extra.into_iter().zip(values) {
            if f.is_finite() {
                xs.push(x);
                fs.push(f);
            }
        }
    }
    let sseed = cfg.stage_seed("surrogate-split");
    ledger.seed("surrogate-split", sseed);
    let surrogate = fit_response_surface(&xs, &fs, &w1, cfg.degree, sseed)?;
    ledger.record("surrogate", misfit.evaluations(), Some(cfg.surrogate_extra as u64), started);

    let started = Instant::now();
    let kseed = cfg.stage_seed("marginal-prior");
    ledger.seed("marginal-prior", kseed);
    let prior_density = estimate_marginal_prior(&w1, cfg.prior_samples, &Bandwidth::Silverman, kseed)?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|a, b| fs[*a].total_cmp(&fs[*b]));
    let start = order
        .iter()
        .map(|&i| decomposition.active(&xs[i]))
        .find(|y| prior_density.eval(y) > 0.0)
        .ok_or_else(|| Error::Numerical("no sample lies inside the estimated prior support".into()))?;
    let settings = ChainSettings {
        n_steps: cfg.n_steps,
        burn_in: cfg.burn_in,
        proposal_std: cfg.proposal_std,
        tune: cfg.tune,
    };
    let cseed = cfg.stage_seed("chain");
    ledger.seed("chain", cseed);
    let chain = mh_active(&surrogate, &prior_density, &start, &settings, cseed)?;
    let ess = effective_sample_size(&chain.states)?;
    let target = cfg.ess_target.unwrap_or(ess.floor() as usize).clamp(1, chain.states.len());
    let (kept, stride) = thin(&chain.states, target)?;
    ledger.record("chain", 0, Some(0), started);

    let started = Instant::now();
    let basis = SliceBasis::new(&decomposition);
    let iseed = cfg.stage_seed("inactive");
    ledger.seed("inactive", iseed);
    let isettings = InactiveSettings {
        burn_in: cfg.inactive_burn_in,
        thin: cfg.inactive_thin,
        ..Default::default()
    };
    let lifted: Vec<Result<Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>>> = kept
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let zs = basis.sample(y, cfg.n_z, &isettings, derive_seed(iseed, &i.to_string()))?;
            zs.into_iter()
                .map(|z| {
                    let x = basis.lift(y, &z)?;
                    Ok((y.clone(), z, x))
                })
                .collect()
        })
        .collect();
    let mut ensemble = PosteriorEnsemble {
        x: Vec::new(),
        y: Vec::new(),
        z: Vec::new(),
        ess,
        stride,
    };
    let mut infeasible = 0;
    for r in lifted {
        match r {
            Ok(rows) => {
                for (y, z, x) in rows {
                    ensemble.x.push(CalibrationVector::from_slice(&x)?);
                    ensemble.y.push(y);
                    ensemble.z.push(z);
                }
            }
            Err(Error::InvalidInput(msg)) => {
                log::debug!("{msg}");
                infeasible += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if ensemble.is_empty() {
        return Err(Error::Numerical("every retained active point was infeasible".into()));
    }
    if infeasible > 0 {
        log::warn!("{infeasible} of {} retained active points had an empty slice", kept.len());
    }
    ledger.record("inactive", 0, Some(0), started);

    let dir = &cfg.out_dir;
    let spath = dir.join(SURROGATE_FILE);
    surrogate.write_csv(&spath)?;
    ledger.artifact(&spath)?;
    let epath = dir.join(ENSEMBLE_FILE);
    ensemble.write_csv(&epath, &inputs.prior)?;
    ledger.artifact(&epath)?;

    let k = cfg.k;
    let active_posterior = moments(chain.states.iter().map(Vec::as_slice), k);
    let prior_rows: Vec<&[f64]> = prior_density.samples().collect();
    let active_prior = moments(prior_rows.iter().copied(), k);
    let truth = match &cfg.truth {
        Some(p) => Some(first_row(p)?),
        None => None,
    };
    let cal = ensemble.calibration_moments();
    let phys_rows: Vec<[f64; N_PARAMS]> =
        ensemble.physical(&inputs.prior)?.iter().map(|p| p.to_array()).collect();
    let phys = moments(phys_rows.iter().map(|r| r.as_slice()), N_PARAMS);
    let diagnostics = json!({
        "provenance": {
            "root_seed": cfg.seed,
            "stage_seeds": &ledger.seeds,
            "eta": cfg.eta,
            "k": cfg.k,
            "degree": cfg.degree,
            "n_steps": cfg.n_steps,
            "burn_in": cfg.burn_in,
            "n_z": cfg.n_z,
            "prior_samples": cfg.prior_samples,
        },
        "acceptance_rate": chain.acceptance_rate(),
        "burn_in_acceptance": chain.burn_in_acceptance,
        "proposal_std": chain.proposal_std,
        "chain_length": chain.states.len(),
        "burn_in": chain.burn_in,
        "ess": ess,
        "stride": stride,
        "retained": kept.len(),
        "infeasible": infeasible,
        "ensemble_size": ensemble.len(),
        "r2": surrogate.r2,
        "r2_holdout": surrogate.r2_holdout,
        "surrogate_coefficients": surrogate.coefficient_count(),
        "surrogate_samples": xs.len(),
        "kde_bandwidth": prior_density.bandwidth(),
        "eigenvalues": eigen_table(&decomposition),
        "active": (0..k).map(|j| json!({
            "coordinate": format!("y_{}", j + 1),
            "prior_mean": active_prior[j].0, "prior_std": active_prior[j].1,
            "posterior_mean": active_posterior[j].0, "posterior_std": active_posterior[j].1,
            "truth": truth.as_ref().map(|t| decomposition.active(t.as_slice())[j]),
        })).collect::<Vec<_>>(),
        "calibration": CALIBRATION_NAMES.iter().enumerate().map(|(i, n)| json!({
            "param": n, "mean": cal[i].0, "std": cal[i].1,
            "truth": truth.as_ref().map(|t| t.0[i]),
        })).collect::<Vec<_>>(),
        "physical": PHYSICAL_NAMES.iter().enumerate().map(|(i, n)| json!({
            "param": n, "unit": inputs.prior.entries()[i].unit, "mean": phys[i].0, "std": phys[i].1,
        })).collect::<Vec<_>>(),
    });
    let dpath = dir.join(DIAGNOSTICS_FILE);
    write_json(&dpath, &diagnostics)?;
    ledger.artifact(&dpath)?;
    ledger.write(dir.join("invert_ledger.json"))?;
    Ok((
        InvertReport {
            ensemble,
            decomposition,
            surrogate,
            acceptance_rate: chain.acceptance_rate(),
            proposal_std: chain.proposal_std,
            chain_length: chain.states.len(),
            infeasible,
            active_posterior,
            active_prior,
            diagnostics,
        },
        ledger,
    ))
}

/// Posterior discharge bands from an ensemble file.
pub fn cmd_pushforward(cfg: &PipelineConfig) -> Result<QuantileBands> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg, false)?;
    let path = cfg.ensemble.clone().unwrap_or_else(|| cfg.out_dir.join(ENSEMBLE_FILE));
    let ensemble = read_ensemble_physical(&path)?;
    let bands = push_forward(
        &ensemble,
        &inputs.meta,
        &inputs.input,
        inputs.obs.as_ref(),
        (cfg.band_lo, cfg.band_hi),
    )?;
    bands.write_csv(cfg.out_dir.join(BANDS_FILE))?;
    Ok(bands)
}

/// Writes a synthetic twin dataset to `out_dir`.
pub fn cmd_synthetic(cfg: &PipelineConfig) -> Result<crate::pipeline::SyntheticTwin> {
    if cfg.years == 0 {
        return Err(Error::Config("`years` must be positive".into()));
    }
    let prior = match &cfg.prior {
        Some(p) => PriorSpec::read(p)?,
        None => PriorSpec::kerschbaum(),
    };
    let truth = match &cfg.truth {
        Some(p) => Some(first_row(p)?),
        None => None,
    };
    let twin = generate_twin(cfg.start_date, cfg.years, cfg.eta, cfg.truth_spread, truth, &prior, cfg.stage_seed("synthetic"))?;
    twin.write(&cfg.out_dir, cfg.eta, cfg.seed)?;
    Ok(twin)
}
