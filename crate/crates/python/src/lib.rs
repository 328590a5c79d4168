//! Python bindings for the LuKARS model and the active-subspace pipeline.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use lukars::forcing::{preprocess_forcing, EffectiveInputSeries, ForcingConfig, ForcingSeries};
use lukars::model::{simulate, CatchmentMeta, ModelState};
use lukars::params::{CalibrationVector, PhysicalParams, PriorSpec, CALIBRATION_NAMES, N_PARAMS, PHYSICAL_NAMES};
use lukars::pipeline::{self, PipelineConfig};
use lukars::subspace;
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(lukars_py, LukarsError, PyException);

fn err(e: lukars::Error) -> PyErr {
    LukarsError::new_err(format!("[{}] {e}", e.category()))
}

fn calibration(x: &[f64]) -> PyResult<CalibrationVector> {
    CalibrationVector::from_slice(x).map_err(err)
}

/// Prior intervals of the physical parameters.
#[pyclass(name = "Prior", module = "lukars_py")]
struct PyPrior {
    inner: PriorSpec,
}

#[pymethods]
impl PyPrior {
    /// Reads a prior table, or uses the built-in Kerschbaum intervals.
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<PathBuf>) -> PyResult<Self> {
        let inner = match path {
            Some(p) => PriorSpec::read(p).map_err(err)?,
            None => PriorSpec::kerschbaum(),
        };
        Ok(PyPrior { inner })
    }

    fn to_physical(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = lukars::to_physical(&calibration(&x)?, &self.inner).map_err(err)?;
        Ok(p.to_array().to_vec())
    }

    fn to_calibration(&self, physical: Vec<f64>) -> PyResult<Vec<f64>> {
        let a: [f64; N_PARAMS] = physical
            .try_into()
            .map_err(|_| LukarsError::new_err(format!("expected {N_PARAMS} physical values")))?;
        let x = lukars::to_calibration(&PhysicalParams::from_array(a), &self.inner).map_err(err)?;
        Ok(x.0.to_vec())
    }

    fn table(&self) -> String {
        self.inner.to_table()
    }
}

/// Hydrotope areas, flow lengths and the baseflow coefficient.
#[pyclass(name = "Catchment", module = "lukars_py")]
struct PyCatchment {
    inner: CatchmentMeta,
}

#[pymethods]
impl PyCatchment {
    #[new]
    fn new(path: PathBuf) -> PyResult<Self> {
        Ok(PyCatchment {
            inner: CatchmentMeta::read(path).map_err(err)?,
        })
    }

    /// The catchment used by the synthetic twin.
    #[staticmethod]
    fn synthetic() -> Self {
        PyCatchment {
            inner: CatchmentMeta::synthetic_default(),
        }
    }

    #[getter]
    fn areas(&self) -> Vec<f64> {
        self.inner.areas.to_vec()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

/// A catchment driven by one forcing series.
#[pyclass(name = "Model", module = "lukars_py")]
struct PyModel {
    prior: PriorSpec,
    meta: CatchmentMeta,
    input: EffectiveInputSeries,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (catchment, forcing, forcing_config=None, prior=None))]
    fn new(
        catchment: PyRef<'_, PyCatchment>,
        forcing: PathBuf,
        forcing_config: Option<PathBuf>,
        prior: Option<PyRef<'_, PyPrior>>,
    ) -> PyResult<Self> {
        let cfg = match forcing_config {
            Some(p) => ForcingConfig::read(p).map_err(err)?,
            None => ForcingConfig::default(),
        };
        let series = ForcingSeries::read_csv(forcing).map_err(err)?;
        Ok(PyModel {
            prior: prior.map_or_else(PriorSpec::kerschbaum, |p| p.inner.clone()),
            meta: catchment.inner,
            input: preprocess_forcing(&series, &cfg).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.input.len()
    }

    fn dates(&self) -> Vec<String> {
        self.input.dates.iter().map(|d| d.to_string()).collect()
    }

    /// Daily spring discharge in m³/d for a calibration vector.
    #[pyo3(signature = (x, first_discharge=None))]
    fn simulate(&self, x: Vec<f64>, first_discharge: Option<f64>) -> PyResult<Vec<f64>> {
        let p = lukars::to_physical(&calibration(&x)?, &self.prior).map_err(err)?;
        let init = ModelState::initial(&p, &self.meta, first_discharge);
        Ok(simulate(&p, &self.meta, &self.input, &init, false).map_err(err)?.total)
    }
}

#[pyfunction]
fn calibration_names() -> Vec<&'static str> {
    CALIBRATION_NAMES.to_vec()
}

#[pyfunction]
fn physical_names() -> Vec<&'static str> {
    PHYSICAL_NAMES.to_vec()
}

/// Uniform draws from the calibration box.
#[pyfunction]
fn sample_prior(n: usize, seed: u64) -> Vec<Vec<f64>> {
    lukars::sample_prior(n, seed).into_iter().map(|x| x.0.to_vec()).collect()
}

#[pyfunction]
fn recommended_sample_count(beta: f64, m: usize, n: usize) -> usize {
    subspace::recommended_sample_count(beta, m, n)
}

/// Eigenvalues (descending) and eigenvectors (as columns, returned row by
/// row) of the averaged gradient outer product.
#[pyfunction]
fn active_subspace(gradients: Vec<Vec<f64>>, k: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let rows: Vec<&[f64]> = gradients.iter().map(Vec::as_slice).collect();
    let c = subspace::c_matrix_from_gradients(&rows).map_err(err)?;
    let d = subspace::decompose(&c, k).map_err(err)?;
    let w = &d.eigenvectors;
    Ok((d.eigenvalues.clone(), (0..w.nrows()).map(|i| w.row(i).iter().copied().collect()).collect()))
}

/// Normalised global sensitivities from the leading `m` eigenpairs.
#[pyfunction]
fn global_sensitivities(eigenvalues: Vec<f64>, eigenvectors: Vec<Vec<f64>>, m: usize) -> PyResult<Vec<f64>> {
    let n = eigenvectors.len();
    if eigenvectors.iter().any(|r| r.len() != n) {
        return Err(LukarsError::new_err("eigenvector matrix must be square"));
    }
    let w = DMatrix::from_fn(n, n, |i, j| eigenvectors[i][j]);
    Ok(subspace::global_sensitivities(&eigenvalues, &w, m).map_err(err)?.normalized)
}

#[pyfunction]
fn effective_sample_size(chain: Vec<Vec<f64>>) -> PyResult<f64> {
    lukars::bayes::effective_sample_size(&chain).map_err(err)
}

/// Synthetic twin: forcing, truth, noiseless and noisy discharge.
#[pyfunction]
#[pyo3(signature = (seed, years=3, eta=0.05))]
fn synthetic_twin<'py>(py: Python<'py>, seed: u64, years: usize, eta: f64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = PipelineConfig::default();
    let twin = pipeline::generate_twin(
        cfg.start_date,
        years,
        eta,
        cfg.truth_spread,
        None,
        &PriorSpec::kerschbaum(),
        pipeline::derive_seed(seed, "synthetic"),
    )
    .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("dates", twin.clean.dates.iter().map(|d| d.to_string()).collect::<Vec<_>>())?;
    out.set_item("clean", twin.clean.total.clone())?;
    out.set_item("observed", twin.observed.clone())?;
    out.set_item("truth", twin.truth.0.to_vec())?;
    Ok(out)
}

/// Runs a pipeline command (`simulate`, `subspace`, `invert`,
/// `pushforward` or `synthetic`) and returns its output directory.
#[pyfunction]
#[pyo3(signature = (command, config=None, overrides=None))]
fn run(command: &str, config: Option<PathBuf>, overrides: Option<HashMap<String, String>>) -> PyResult<String> {
    let mut cfg = match &config {
        Some(p) => PipelineConfig::read(p).map_err(err)?,
        None => PipelineConfig::default(),
    };
    for (k, v) in overrides.unwrap_or_default() {
        cfg.set(&k, &v, Path::new("")).map_err(err)?;
    }
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| LukarsError::new_err(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    match command {
        "simulate" => pipeline::cmd_simulate(&cfg).map(|_| ()),
        "subspace" => pipeline::cmd_subspace(&cfg).map(|_| ()),
        "invert" => pipeline::cmd_invert(&cfg).map(|_| ()),
        "pushforward" => pipeline::cmd_pushforward(&cfg).map(|_| ()),
        "synthetic" => pipeline::cmd_synthetic(&cfg).map(|_| ()),
        other => return Err(LukarsError::new_err(format!("unknown command `{other}`"))),
    }
    .map_err(err)?;
    Ok(cfg.out_dir.display().to_string())
}

#[pymodule]
fn lukars_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LukarsError", m.py().get_type::<LukarsError>())?;
    m.add_class::<PyPrior>()?;
    m.add_class::<PyCatchment>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(calibration_names, m)?)?;
    m.add_function(wrap_pyfunction!(physical_names, m)?)?;
    m.add_function(wrap_pyfunction!(sample_prior, m)?)?;
    m.add_function(wrap_pyfunction!(recommended_sample_count, m)?)?;
    m.add_function(wrap_pyfunction!(active_subspace, m)?)?;
    m.add_function(wrap_pyfunction!(global_sensitivities, m)?)?;
    m.add_function(wrap_pyfunction!(effective_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_twin, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
