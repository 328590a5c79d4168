use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fraction of samples held out to score generalization.
pub const HOLDOUT_FRACTION: f64 = 0.2;

/// Exponent tuples of all monomials in `dim` variables of total degree at
/// most `degree`, in graded lexicographic order: by total degree, then
/// lexicographically with the first variable's exponent decreasing.
pub fn monomial_exponents(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    fn fill(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            fill(dim, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    for d in 0..=degree as u32 {
        fill(dim, d, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// `C(dim + degree, degree)`.
pub fn coefficient_count(dim: usize, degree: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=degree as u128 {
        c = c * (dim as u128 + i) / i;
    }
    c as usize
}

/// Least-squares polynomial response surface on the active variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySurrogate {
    pub dim: usize,
    pub degree: usize,
    pub exponents: Vec<Vec<u32>>,
    pub coefficients: Vec<f64>,
    /// Coefficient of determination on the fitting samples.
    pub r2: f64,
    /// Coefficient of determination on the held-out samples.
    pub r2_holdout: f64,
    pub n_train: usize,
    pub n_holdout: usize,
}

fn basis_row(exponents: &[Vec<u32>], y: &[f64], row: &mut [f64]) {
    for (slot, e) in row.iter_mut().zip(exponents) {
        *slot = e.iter().zip(y).map(|(&p, &v)| v.powi(p as i32)).product();
    }
}

/// `1 - SS_res / SS_tot`; defined as 1 for a constant target.
pub fn r_squared(pred: &[f64], target: &[f64]) -> f64 {
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let ss_tot: f64 = target.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    if ss_tot == 0.0 {
        // a constant target is fit exactly by the constant term
        return 1.0;
    }
    1.0 - ss_res / ss_tot
}

impl PolySurrogate {
    pub fn coefficient_count(&self) -> usize {
        self.coefficients.len()
    }

    /// Evaluates the polynomial at active coordinates `y`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(e, c)| c * e.iter().zip(y).map(|(&p, &v)| v.powi(p as i32)).product::<f64>())
            .sum()
    }

    /// Approximation of the full-space function: `G(W1^T x)`.
    pub fn eval_full(&self, w1: &DMatrix<f64>, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let y = w1.tr_mul(&xv);
        self.eval(y.as_slice())
    }

    /// Fits directly on active coordinates `ys` (one row per sample).
    pub fn fit(ys: &[Vec<f64>], fs: &[f64], degree: usize, seed: u64) -> Result<Self> {
        if ys.len() != fs.len() {
            return Err(Error::InvalidInput(format!("{} inputs but {} targets", ys.len(), fs.len())));
        }
        if degree == 0 {
            return Err(Error::Config("surrogate degree must be >= 1".into()));
        }
        let dim = ys.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidInput("no samples".into()));
        }
        let exponents = monomial_exponents(dim, degree);
        let p = exponents.len();
        if ys.len() < 2 * p {
            return Err(Error::InvalidInput(format!(
                "{} samples cannot support {p} coefficients (need at least {})",
                ys.len(),
                2 * p
            )));
        }
        if fs.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidInput("non-finite target value".into()));
        }
        let mut idx: Vec<usize> = (0..ys.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_holdout = (ys.len() as f64 * HOLDOUT_FRACTION).round() as usize;
        let n_train = ys.len() - n_holdout;
        let (train, hold) = idx.split_at(n_train);

        let mut a = DMatrix::zeros(n_train, p);
        let mut row = vec![0.0; p];
        for (r, &i) in train.iter().enumerate() {
            basis_row(&exponents, &ys[i], &mut row);
            for (c, v) in row.iter().enumerate() {
                a[(r, c)] = *v;
            }
        }
        let b = DVector::from_iterator(n_train, train.iter().map(|&i| fs[i]));

        // scale columns to unit norm so the rank test is scale-free
        let norms: Vec<f64> = (0..p).map(|c| a.column(c).norm()).collect();
        if let Some(c) = norms.iter().position(|n| *n == 0.0) {
            return Err(Error::Numerical(format!(
                "rank-deficient design matrix: basis term {:?} vanishes on every sample",
                exponents[c]
            )));
        }
        for (c, n) in norms.iter().enumerate() {
            a.column_mut(c).scale_mut(1.0 / n);
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let tol = 1e-10 * smax;
        let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
        if rank < p {
            return Err(Error::Numerical(format!(
                "rank-deficient design matrix: rank {rank} < {p} coefficients (degree {degree} in {dim} variables)"
            )));
        }
        let sol = svd
            .solve(&b, tol)
            .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
        let coefficients: Vec<f64> = sol.iter().zip(&norms).map(|(s, n)| s / n).collect();

        let mut surrogate = PolySurrogate {
            dim,
            degree,
            exponents,
            coefficients,
            r2: 0.0,
            r2_holdout: 0.0,
            n_train,
            n_holdout,
        };
        let score = |set: &[usize]| {
            let pred: Vec<f64> = set.iter().map(|&i| surrogate.eval(&ys[i])).collect();
            let target: Vec<f64> = set.iter().map(|&i| fs[i]).collect();
            r_squared(&pred, &target)
        };
        let (r2, r2_holdout) = (score(train), if hold.is_empty() { f64::NAN } else { score(hold) });
        surrogate.r2 = r2;
        surrogate.r2_holdout = r2_holdout;
        Ok(surrogate)
    }

    /// `index,coefficient,exp_1,...,exp_k` in basis order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,coefficient");
        for j in 1..=self.dim {
            out.push_str(&format!(",exp_{j}"));
        }
        out.push('\n');
        for (i, (c, e)) in self.coefficients.iter().zip(&self.exponents).enumerate() {
            out.push_str(&format!("{i},{}", crate::io::fmt_f64(*c)));
            for p in e {
                out.push_str(&format!(",{p}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_string(path, &self.to_csv())
    }
}

/// Fits `G` with `G(W1^T x_i) ≈ f_i`.
pub fn fit_response_surface(
    xs: &[Vec<f64>],
    fs: &[f64],
    w1: &DMatrix<f64>,
    degree: usize,
    seed: u64,
) -> Result<PolySurrogate> {
    let ys: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            if x.len() != w1.nrows() {
                return Err(Error::InvalidInput(format!(
                    "sample dimension {} does not match W1 with {} rows",
                    x.len(),
                    w1.nrows()
                )));
            }
            Ok(w1.tr_mul(&DVector::from_column_slice(x)).as_slice().to_vec())
        })
        .collect::<Result<_>>()?;
    PolySurrogate::fit(&ys, fs, degree, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn basis_sizes_and_order() {
        assert_eq!(coefficient_count(4, 4), 70);
        assert_eq!(monomial_exponents(4, 4).len(), 70);
        assert_eq!(monomial_exponents(1, 3).len(), 4);
        let e = monomial_exponents(2, 2);
        let want: Vec<Vec<u32>> = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]];
        assert_eq!(e, want);
    }

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn recovers_exact_polynomial() {
        let ys = random_points(400, 2, 1);
        let f = |y: &[f64]| 1.0 - 2.0 * y[0] + y[0] * y[1] - 0.5 * y[1].powi(3) + 0.25 * y[0].powi(2) * y[1];
        let fs: Vec<f64> = ys.iter().map(|y| f(y)).collect();
        let s = PolySurrogate::fit(&ys, &fs, 3, 2).unwrap();
        assert!(s.r2 > 1.0 - 1e-12 && s.r2_holdout > 1.0 - 1e-12);
        assert!((s.eval(&[0.3, -0.4]) - f(&[0.3, -0.4])).abs() < 1e-10);
        assert_eq!(s.n_holdout, 80);
    }

    #[test]
    fn constant_target_has_unit_r2() {
        let ys = random_points(100, 3, 4);
        let s = PolySurrogate::fit(&ys, &vec![7.5; 100], 2, 0).unwrap();
        assert_eq!(s.r2, 1.0);
        assert!((s.eval(&[0.1, 0.2, -0.3]) - 7.5).abs() < 1e-10);
    }

    #[test]
    fn guards_sample_count_and_rank() {
        let ys = random_points(19, 2, 3);
        assert!(PolySurrogate::fit(&ys, &[0.0; 19], 3, 0).is_err());
        // second coordinate identical to the first: the basis collapses
        let ys: Vec<Vec<f64>> = random_points(100, 1, 5).into_iter().map(|y| vec![y[0], y[0]]).collect();
        let err = PolySurrogate::fit(&ys, &vec![1.0; 100], 2, 0).unwrap_err();
        assert!(err.to_string().contains("rank"), "{err}");
    }
}
