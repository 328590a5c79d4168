use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A misfit value and its finite-difference gradient at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
}

/// `ceil(beta * m * ln n)` gradient samples for `m` accurate eigenpairs in
/// dimension `n`.
pub fn recommended_sample_count(beta: f64, m: usize, n: usize) -> usize {
    if !(2.0..=10.0).contains(&beta) {
        log::warn!("sampling factor {beta} outside the usual range [2, 10]");
    }
    if m == 0 || n == 0 {
        return 0;
    }
    (beta * m as f64 * (n as f64).ln()).ceil() as usize
}

/// Thread-safe count of forward evaluations.
#[derive(Debug, Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Finite-difference gradient on the `[-1, 1]^n` box.
///
/// Central differences in the interior. Where `x_j ± h` would leave the box
/// a one-sided second-order stencil is used instead; both use two
/// evaluations per coordinate, so one sample costs exactly `2n + 1`
/// evaluations. Returns `None` if any evaluation is non-finite.
pub fn misfit_gradient<F>(x: &[f64], f: &F, h: f64) -> Option<GradientSample>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let fx = f(x);
    let mut g = vec![0.0; x.len()];
    let mut ok = fx.is_finite();
    let mut probe = x.to_vec();
    let eval_at = |j: usize, v: f64, probe: &mut Vec<f64>| {
        probe[j] = v;
        let r = f(probe);
        probe[j] = x[j];
        r
    };
    for j in 0..x.len() {
        let xj = x[j];
        let gj = if xj + h > 1.0 {
            let (f1, f2) = (eval_at(j, xj - h, &mut probe), eval_at(j, xj - 2.0 * h, &mut probe));
            (3.0 * fx - 4.0 * f1 + f2) / (2.0 * h)
        } else if xj - h < -1.0 {
            let (f1, f2) = (eval_at(j, xj + h, &mut probe), eval_at(j, xj + 2.0 * h, &mut probe));
            (-3.0 * fx + 4.0 * f1 - f2) / (2.0 * h)
        } else {
            let (fp, fm) = (eval_at(j, xj + h, &mut probe), eval_at(j, xj - h, &mut probe));
            (fp - fm) / (2.0 * h)
        };
        ok &= gj.is_finite();
        g[j] = gj;
    }
    ok.then(|| GradientSample {
        x: x.to_vec(),
        f: fx,
        g,
    })
}

/// Result of a gradient sweep over many points.
#[derive(Debug, Clone)]
pub struct GradientSweep {
    pub samples: Vec<GradientSample>,
    /// Indices of points whose evaluation produced a non-finite value.
    pub failed: Vec<usize>,
    pub evaluations: u64,
}

/// Largest tolerated fraction of failed gradient samples.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Evaluates gradients at every point in parallel. Output order follows the
/// input order regardless of scheduling.
pub fn gradient_sweep<F>(points: &[Vec<f64>], f: &F, h: f64) -> Result<GradientSweep>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::Config(format!("finite-difference step {h} must lie in (0, 0.5)")));
    }
    let results: Vec<Option<GradientSample>> = points.par_iter().map(|x| misfit_gradient(x, f, h)).collect();
    let evaluations = points.iter().map(|x| 2 * x.len() as u64 + 1).sum();
    let mut samples = Vec::with_capacity(points.len());
    let mut failed = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(s) => samples.push(s),
            None => failed.push(i),
        }
    }
    if !failed.is_empty() {
        log::warn!("{} of {} gradient samples dropped (non-finite misfit)", failed.len(), points.len());
    }
    if !points.is_empty() && failed.len() as f64 > MAX_FAILURE_RATE * points.len() as f64 {
        return Err(Error::Numerical(format!(
            "{} of {} gradient samples failed (limit {:.0}%); first failing point index {}",
            failed.len(),
            points.len(),
            MAX_FAILURE_RATE * 100.0,
            failed[0]
        )));
    }
    Ok(GradientSweep {
        samples,
        failed,
        evaluations,
    })
}
