#![allow(dead_code)]

use std::path::Path;

use lukars::bayes::{Bandwidth, DensityEstimate};
use lukars::pipeline::{cmd_synthetic, PipelineConfig};
use lukars::subspace::PolySurrogate;

/// Writes a synthetic twin into `dir` and returns the config that reads it.
pub fn twin(dir: &Path, years: usize, seed: u64) -> PipelineConfig {
    let cfg = PipelineConfig {
        out_dir: dir.to_path_buf(),
        years,
        seed,
        ..Default::default()
    };
    cmd_synthetic(&cfg).unwrap();
    let mut cfg = PipelineConfig::read(dir.join("twin.cfg")).unwrap();
    cfg.out_dir = dir.join("out");
    std::fs::create_dir_all(&cfg.out_dir).unwrap();
    cfg
}

/// Small but complete pipeline settings for tests.
pub fn quick(mut cfg: PipelineConfig) -> PipelineConfig {
    cfg.n_gradients = 60;
    cfg.k = 2;
    cfg.degree = 2;
    cfg.bootstrap = 20;
    cfg.prior_samples = 20_000;
    cfg.n_steps = 6000;
    cfg.burn_in = 1000;
    cfg
}

/// Kernel estimate that is flat to about 1e-8 on [-20, 20]: kernels one
/// grid step wide on a fine grid.
pub fn flat_density() -> DensityEstimate {
    let step = 0.05;
    let pts: Vec<Vec<f64>> = (-600..=600).map(|i| vec![i as f64 * step]).collect();
    DensityEstimate::new(&pts, &Bandwidth::Fixed(vec![step])).unwrap()
}

/// Degree-2 surrogate equal to `y^2 / 2` in one dimension.
pub fn half_square() -> PolySurrogate {
    let ys: Vec<Vec<f64>> = (0..40).map(|i| vec![-2.0 + 0.1 * i as f64]).collect();
    let fs: Vec<f64> = ys.iter().map(|y| 0.5 * y[0] * y[0]).collect();
    PolySurrogate::fit(&ys, &fs, 2, 0).unwrap()
}

/// Asymptotic Kolmogorov distribution tail `P(D > d)` for effective sample
/// size `n`.
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let sq = n.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}
