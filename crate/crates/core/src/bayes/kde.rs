use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::bayes::support::ProjectedBox;
use crate::error::{Error, Result};

/// Smallest prior sample count accepted for the marginal-prior estimate.
pub const MIN_PRIOR_SAMPLES: usize = 10_000;
/// Kernels are truncated at this many bandwidths per coordinate.
const CUTOFF: f64 = 4.0;
/// Cell width in bandwidths for the neighbour lookup.
const CELL: f64 = 2.0;
const REACH: i64 = (CUTOFF / CELL) as i64;

/// Bandwidth selection for [`DensityEstimate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule of thumb per coordinate.
    Silverman,
    Fixed(Vec<f64>),
}

/// Product-Gaussian kernel density estimate.
///
/// Kernels are cut off at four bandwidths in each coordinate so that an
/// evaluation only visits nearby samples. An optional support set forces
/// the density to zero outside it.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    dim: usize,
    n: usize,
    /// Samples grouped by cell, row-major.
    points: Vec<f64>,
    bandwidth: Vec<f64>,
    origin: Vec<f64>,
    counts: Vec<i64>,
    cells: HashMap<u64, (usize, usize)>,
    log_norm: f64,
    support: Option<ProjectedBox>,
}

fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Silverman bandwidths: `0.9 A n^(-1/5)` in one dimension and
/// `(4 / ((d + 2) n))^(1/(d + 4)) A_j` otherwise, with
/// `A = min(std, IQR / 1.34)`.
pub fn silverman_bandwidth(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = samples.len();
    let d = samples.first().map_or(0, Vec::len);
    if n < 2 || d == 0 {
        return Err(Error::InvalidInput("bandwidth needs at least two samples".into()));
    }
    let factor = if d == 1 {
        0.9 * (n as f64).powf(-0.2)
    } else {
        (4.0 / ((d as f64 + 2.0) * n as f64)).powf(1.0 / (d as f64 + 4.0))
    };
    (0..d)
        .map(|j| {
            let mut col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            col.sort_by(f64::total_cmp);
            let iqr = quantile_sorted(&col, 0.75) - quantile_sorted(&col, 0.25);
            let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            if !(spread > 0.0 && spread.is_finite()) {
                return Err(Error::Numerical(format!("coordinate {j} of the samples has no spread")));
            }
            Ok(factor * spread)
        })
        .collect()
}

impl DensityEstimate {
    pub fn new(samples: &[Vec<f64>], rule: &Bandwidth) -> Result<Self> {
        let dim = samples.first().map_or(0, Vec::len);
        if samples.is_empty() || dim == 0 {
            return Err(Error::InvalidInput("density estimate needs samples".into()));
        }
        if samples.iter().any(|s| s.len() != dim || s.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput("samples must be finite and of equal dimension".into()));
        }
        let bandwidth = match rule {
            Bandwidth::Silverman => silverman_bandwidth(samples)?,
            Bandwidth::Fixed(h) => {
                if h.len() != dim || h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::Config(format!("need {dim} positive bandwidths")));
                }
                h.clone()
            }
        };
        let mut origin = vec![f64::INFINITY; dim];
        let mut top = vec![f64::NEG_INFINITY; dim];
        for s in samples {
            for j in 0..dim {
                origin[j] = origin[j].min(s[j]);
                top[j] = top[j].max(s[j]);
            }
        }
        let counts: Vec<i64> = (0..dim)
            .map(|j| ((top[j] - origin[j]) / (CELL * bandwidth[j])).floor() as i64 + 1)
            .collect();
        if counts.iter().try_fold(1u64, |acc, c| acc.checked_mul(*c as u64)).is_none() {
            return Err(Error::Numerical("too many kernel cells for this dimension".into()));
        }
        let mut est = DensityEstimate {
            dim,
            n: samples.len(),
            points: Vec::with_capacity(samples.len() * dim),
            log_norm: 0.0,
            bandwidth,
            origin,
            counts,
            cells: HashMap::new(),
            support: None,
        };
        let mut keyed: Vec<(u64, usize)> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (est.key(&est.cell_of(s)).expect("sample inside its own grid"), i))
            .collect();
        keyed.sort_unstable();
        let mut start = 0;
        for (pos, (key, i)) in keyed.iter().enumerate() {
            est.points.extend_from_slice(&samples[*i]);
            if pos + 1 == keyed.len() || keyed[pos + 1].0 != *key {
                est.cells.insert(*key, (start, pos + 1));
                start = pos + 1;
            }
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        est.log_norm = -(est.n as f64).ln()
            - est.bandwidth.iter().map(|h| (h * two_pi.sqrt()).ln()).sum::<f64>();
        Ok(est)
    }

    fn cell_of(&self, y: &[f64]) -> Vec<i64> {
        (0..self.dim)
            .map(|j| ((y[j] - self.origin[j]) / (CELL * self.bandwidth[j])).floor() as i64)
            .collect()
    }

    fn key(&self, cell: &[i64]) -> Option<u64> {
        let mut k = 0u64;
        for (c, n) in cell.iter().zip(&self.counts) {
            if *c < 0 || c >= n {
                return None;
            }
            k = k * *n as u64 + *c as u64;
        }
        Some(k)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    /// Reference samples, grouped by kernel cell.
    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dim)
    }

    fn kernel_sum(&self, y: &[f64], range: (usize, usize)) -> f64 {
        let mut acc = 0.0;
        'pt: for p in self.points[range.0 * self.dim..range.1 * self.dim].chunks(self.dim) {
            let mut q = 0.0;
            for j in 0..self.dim {
                let u = (y[j] - p[j]) / self.bandwidth[j];
                if u.abs() > CUTOFF {
                    continue 'pt;
                }
                q += u * u;
            }
            acc += (-0.5 * q).exp();
        }
        acc
    }

    pub fn with_support(mut self, support: ProjectedBox) -> Result<Self> {
        if support.dim() != self.dim {
            return Err(Error::InvalidInput(format!(
                "support of dimension {} for a {}-dimensional density",
                support.dim(),
                self.dim
            )));
        }
        self.support = Some(support);
        Ok(self)
    }

    pub fn support(&self) -> Option<&ProjectedBox> {
        self.support.as_ref()
    }

    /// `ρ̂(y)`; zero beyond four bandwidths of every sample and outside the
    /// support.
    pub fn eval(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.dim, "density evaluated at a point of the wrong dimension");
        if self.support.as_ref().is_some_and(|s| !s.contains(y)) {
            return 0.0;
        }
        let centre = self.cell_of(y);
        let span = 2 * REACH as usize + 1;
        let visits = span.checked_pow(self.dim as u32).unwrap_or(usize::MAX);
        let sum = if visits > self.cells.len() {
            self.kernel_sum(y, (0, self.n))
        } else {
            let mut acc = 0.0;
            let mut offset = vec![-REACH; self.dim];
            let mut cell = vec![0i64; self.dim];
            loop {
                for j in 0..self.dim {
                    cell[j] = centre[j] + offset[j];
                }
                if let Some(r) = self.key(&cell).and_then(|k| self.cells.get(&k)) {
                    acc += self.kernel_sum(y, *r);
                }
                let mut j = 0;
                loop {
                    if j == self.dim {
                        return self.finish(acc);
                    }
                    offset[j] += 1;
                    if offset[j] <= REACH {
                        break;
                    }
                    offset[j] = -REACH;
                    j += 1;
                }
            }
        };
        self.finish(sum)
    }

    fn finish(&self, sum: f64) -> f64 {
        if sum > 0.0 {
            (sum.ln() + self.log_norm).exp()
        } else {
            0.0
        }
    }

    /// `ln ρ̂(y)`, `-inf` where the density vanishes.
    pub fn ln_eval(&self, y: &[f64]) -> f64 {
        let v = self.eval(y);
        if v > 0.0 {
            v.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// CDF of coordinate `j` of the (untruncated) kernel mixture.
    pub fn marginal_cdf(&self, j: usize, t: f64) -> f64 {
        let h = self.bandwidth[j];
        let sum: f64 = self
            .samples()
            .map(|p| 0.5 * erfc(-(t - p[j]) / (h * std::f64::consts::SQRT_2)))
            .sum();
        sum / self.n as f64
    }

    /// Draws from the kernel mixture.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let i = rng.random_range(0..self.n);
        let p = &self.points[i * self.dim..(i + 1) * self.dim];
        p.iter()
            .zip(&self.bandwidth)
            .map(|(c, h)| c + h * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// KDE of the active variable `W1^T x` under the uniform prior on the box,
/// restricted to the image of the box.
pub fn estimate_marginal_prior(
    w1: &DMatrix<f64>,
    n_samples: usize,
    rule: &Bandwidth,
    seed: u64,
) -> Result<DensityEstimate> {
    if n_samples < MIN_PRIOR_SAMPLES {
        return Err(Error::Config(format!(
            "marginal prior needs at least {MIN_PRIOR_SAMPLES} draws, got {n_samples}"
        )));
    }
    let n = w1.nrows();
    let ys = prior_projections(w1, n_samples, seed, n);
    DensityEstimate::new(&ys, rule)?.with_support(ProjectedBox::new(w1)?)
}

fn prior_projections(w1: &DMatrix<f64>, count: usize, seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
            w1.tr_mul(&x).as_slice().to_vec()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(est: &DensityEstimate, y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for p in est.samples() {
            let mut q = 0.0;
            let mut inside = true;
            for j in 0..est.dim() {
                let u = (y[j] - p[j]) / est.bandwidth()[j];
                inside &= u.abs() <= CUTOFF;
                q += u * u;
            }
            if inside {
                acc += (-0.5 * q).exp();
            }
        }
        let h: f64 = est.bandwidth().iter().product();
        acc / (est.sample_count() as f64 * h * (2.0 * std::f64::consts::PI).powf(est.dim() as f64 / 2.0))
    }

    #[test]
    fn cell_lookup_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 1..=4 {
            let pts: Vec<Vec<f64>> =
                (0..3000).map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
            let est = DensityEstimate::new(&pts, &Bandwidth::Silverman).unwrap();
            for _ in 0..50 {
                let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
                let (a, b) = (est.eval(&y), brute_force(&est, &y));
                assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "dim {dim}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn silverman_one_dimension() {
        let pts: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64]).collect();
        let h = silverman_bandwidth(&pts).unwrap();
        // std 288.8, IQR/1.34 = 745.8
        let sd = (1000.0f64 * 1000.0 - 1.0).sqrt() / 12f64.sqrt() * (1000.0f64 / 999.0).sqrt();
        assert!((h[0] - 0.9 * sd * 1000f64.powf(-0.2)).abs() < 1e-9);
    }

    #[test]
    fn axis_marginal_is_flat() {
        let mut w1 = DMatrix::zeros(21, 1);
        w1[(4, 0)] = 1.0;
        let est = estimate_marginal_prior(&w1, 100_000, &Bandwidth::Silverman, 11).unwrap();
        for i in 0..=180 {
            let y = -0.9 + i as f64 * 0.01;
            let v = est.eval(&[y]);
            assert!((v - 0.5).abs() < 0.05 * 0.5, "rho({y}) = {v}");
        }
    }

    #[test]
    fn diagonal_marginal_is_triangular() {
        let mut w1 = DMatrix::zeros(21, 1);
        w1[(0, 0)] = std::f64::consts::FRAC_1_SQRT_2;
        w1[(1, 0)] = std::f64::consts::FRAC_1_SQRT_2;
        let est = estimate_marginal_prior(&w1, 100_000, &Bandwidth::Silverman, 5).unwrap();
        let a = std::f64::consts::SQRT_2;
        let peak = 1.0 / a;
        let mut worst: f64 = 0.0;
        for i in 0..=200 {
            let y = -0.8 * a + i as f64 * 0.008 * a;
            let exact = (a - y.abs()) / (a * a);
            worst = worst.max((est.eval(&[y]) - exact).abs());
        }
        assert!(worst < 0.05 * peak, "sup error {worst}");
    }

    #[test]
    fn non_negative_and_normalised() {
        let w1 = DMatrix::from_fn(3, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let est = DensityEstimate::new(&prior_projections(&w1, 20_000, 2, 3), &Bandwidth::Silverman).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // importance estimate over the box [-1.5, 1.5]^2
        let m = 20_000;
        let mut acc = 0.0;
        for _ in 0..m {
            let y = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let v = est.eval(&y);
            assert!(v >= 0.0);
            acc += v;
        }
        let integral = acc / m as f64 * 9.0;
        assert!((integral - 1.0).abs() < 0.05, "integral {integral}");
        for i in 0..1000 {
            assert!(est.eval(&[-3.0 + 0.006 * i as f64, 0.2]) >= 0.0);
        }
        assert_eq!(est.eval(&[10.0, 10.0]), 0.0);
        let restricted = est.with_support(ProjectedBox::new(&w1).unwrap()).unwrap();
        assert_eq!(restricted.eval(&[1.01, 0.0]), 0.0);
        assert!(restricted.eval(&[0.99, 0.0]) > 0.0);
    }

    #[test]
    fn marginal_cdf_limits() {
        let pts: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0]).collect();
        let est = DensityEstimate::new(&pts, &Bandwidth::Silverman).unwrap();
        assert!(est.marginal_cdf(0, -10.0) < 1e-12);
        assert!((est.marginal_cdf(0, 10.0) - 1.0).abs() < 1e-12);
        assert!((est.marginal_cdf(0, 0.495) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rejects_small_prior_sample() {
        let w1 = DMatrix::from_element(21, 1, 1.0 / 21f64.sqrt());
        assert!(estimate_marginal_prior(&w1, 500, &Bandwidth::Silverman, 0).is_err());
    }
}
