use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::subspace::GradientSample;

/// Monte Carlo estimate `(1/N) sum g g^T` of the gradient outer-product matrix.
pub fn estimate_c_matrix(samples: &[GradientSample]) -> Result<DMatrix<f64>> {
    let grads: Vec<&[f64]> = samples.iter().map(|s| s.g.as_slice()).collect();
    c_matrix_from_gradients(&grads)
}

pub fn c_matrix_from_gradients(grads: &[&[f64]]) -> Result<DMatrix<f64>> {
    let Some(first) = grads.first() else {
        return Err(Error::InvalidInput("no gradient samples".into()));
    };
    let n = first.len();
    if grads.iter().any(|g| g.len() != n) {
        return Err(Error::InvalidInput("gradient samples differ in dimension".into()));
    }
    let g = DMatrix::from_fn(grads.len(), n, |i, j| grads[i][j]);
    let mut c = g.tr_mul(&g);
    c /= grads.len() as f64;
    Ok(c)
}

/// Sorted eigendecomposition with an active/inactive split after column `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceDecomposition {
    /// Descending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub k: usize,
    /// Bootstrap (min, max) per eigenvalue, when computed.
    pub bands: Option<Vec<(f64, f64)>>,
}

impl SubspaceDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn w1(&self) -> DMatrix<f64> {
        self.eigenvectors.columns(0, self.k).into_owned()
    }

    pub fn w2(&self) -> DMatrix<f64> {
        self.eigenvectors.columns(self.k, self.dim() - self.k).into_owned()
    }

    /// Active variable `W1^T x`.
    pub fn active(&self, x: &[f64]) -> Vec<f64> {
        project(&self.eigenvectors, 0, self.k, x)
    }

    /// Inactive variable `W2^T x`.
    pub fn inactive(&self, x: &[f64]) -> Vec<f64> {
        project(&self.eigenvectors, self.k, self.dim() - self.k, x)
    }

    /// Same eigenpairs, different split.
    pub fn with_split(&self, k: usize) -> Result<Self> {
        check_split(k, self.dim())?;
        Ok(SubspaceDecomposition { k, ..self.clone() })
    }

    /// `index,eigenvalue,band_min,band_max` (bands empty when absent).
    pub fn eigenvalues_csv(&self) -> String {
        let f = crate::io::fmt_f64;
        let mut out = String::from("index,eigenvalue,band_min,band_max\n");
        for (i, l) in self.eigenvalues.iter().enumerate() {
            let (lo, hi) = match &self.bands {
                Some(b) => (f(b[i].0), f(b[i].1)),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!("{},{},{lo},{hi}\n", i + 1, f(*l)));
        }
        out
    }

    /// One row per parameter: `param,w_1,...,w_n`.
    pub fn eigenvectors_csv(&self, names: &[&str]) -> String {
        let n = self.dim();
        let mut out = String::from("param");
        for j in 1..=n {
            out.push_str(&format!(",w_{j}"));
        }
        out.push('\n');
        for i in 0..n {
            out.push_str(names.get(i).copied().unwrap_or("x"));
            for j in 0..n {
                out.push(',');
                out.push_str(&crate::io::fmt_f64(self.eigenvectors[(i, j)]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, eigenvalues: impl AsRef<Path>, eigenvectors: impl AsRef<Path>, names: &[&str]) -> Result<()> {
        crate::io::write_string(eigenvalues, &self.eigenvalues_csv())?;
        crate::io::write_string(eigenvectors, &self.eigenvectors_csv(names))
    }

    /// Reads the two CSVs written by [`SubspaceDecomposition::write`].
    pub fn read(eigenvalues: impl AsRef<Path>, eigenvectors: impl AsRef<Path>, k: usize) -> Result<Self> {
        let (pv, pw) = (eigenvalues.as_ref(), eigenvectors.as_ref());
        let vals = crate::io::read_table(pv, &["index", "eigenvalue", "band_min", "band_max"])?;
        let mut eigenvalues = Vec::new();
        let mut bands = Vec::new();
        for row in &vals.rows {
            eigenvalues.push(row.float(pv, 1)?);
            if !row.fields[2].trim().is_empty() {
                bands.push((row.float(pv, 2)?, row.float(pv, 3)?));
            }
        }
        let n = eigenvalues.len();
        let cols: Vec<String> = (1..=n).map(|j| format!("w_{j}")).collect();
        let mut required: Vec<&str> = vec!["param"];
        required.extend(cols.iter().map(String::as_str));
        let vecs = crate::io::read_table(pw, &required)?;
        if vecs.rows.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} has {} rows, expected {n}",
                pw.display(),
                vecs.rows.len()
            )));
        }
        let mut w = DMatrix::zeros(n, n);
        for (i, row) in vecs.rows.iter().enumerate() {
            for j in 0..n {
                w[(i, j)] = row.float(pw, j + 1)?;
            }
        }
        check_split(k, n)?;
        Ok(SubspaceDecomposition {
            eigenvalues,
            eigenvectors: w,
            k,
            bands: (bands.len() == n).then_some(bands),
        })
    }
}

fn project(w: &DMatrix<f64>, start: usize, count: usize, x: &[f64]) -> Vec<f64> {
    (start..start + count)
        .map(|j| w.column(j).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn check_split(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::Config(format!("subspace split k = {k} must satisfy 0 < k < {n}")));
    }
    Ok(())
}

/// Eigenvalues in descending order with eigenvectors; each eigenvector is
/// signed so its largest-magnitude component is positive.
pub fn sorted_eigen(c: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !c.is_square() {
        return Err(Error::InvalidInput("matrix is not square".into()));
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    let asym = (c - c.transpose()).amax();
    if asym > 1e-8 * scale.max(1.0) {
        return Err(Error::Numerical(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = c.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: DVector<f64> = eig.eigenvectors.column(src).into_owned();
        let pivot = (0..n).fold(0, |best, i| if col[i].abs() > col[best].abs() { i } else { best });
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Eigendecomposition of `c` split after the first `k` eigenvectors.
pub fn decompose(c: &DMatrix<f64>, k: usize) -> Result<SubspaceDecomposition> {
    check_split(k, c.nrows())?;
    let (eigenvalues, eigenvectors) = sorted_eigen(c)?;
    Ok(SubspaceDecomposition {
        eigenvalues,
        eigenvectors,
        k,
        bands: None,
    })
}

/// Bootstrap min/max of every eigenvalue over `replicates` resamples (with
/// replacement) of the gradient set.
pub fn bootstrap_bands(samples: &[GradientSample], replicates: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no gradient samples".into()));
    }
    if replicates < 100 {
        log::warn!("only {replicates} bootstrap replicates requested");
    }
    let (point, _) = sorted_eigen(&estimate_c_matrix(samples)?)?;
    let n = samples.len();
    let spectra: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let grads: Vec<&[f64]> = (0..n).map(|_| samples[rng.random_range(0..n)].g.as_slice()).collect();
            let c = c_matrix_from_gradients(&grads)?;
            Ok(sorted_eigen(&c)?.0)
        })
        .collect::<Result<_>>()?;
    let mut bands: Vec<(f64, f64)> = point.iter().map(|&l| (l, l)).collect();
    for s in &spectra {
        for (band, &l) in bands.iter_mut().zip(s) {
            band.0 = band.0.min(l);
            band.1 = band.1.max(l);
        }
    }
    Ok(bands)
}

/// Activity-score sensitivities `s_i = sum_{j<m} lambda_j w_ij^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivities {
    pub raw: Vec<f64>,
    /// `raw / max(raw)`, or all zero when every score is zero.
    pub normalized: Vec<f64>,
}

pub fn global_sensitivities(eigenvalues: &[f64], w: &DMatrix<f64>, m: usize) -> Result<Sensitivities> {
    let n = eigenvalues.len();
    if m == 0 || m > n || w.ncols() != n {
        return Err(Error::InvalidInput(format!("need 0 < m <= {n}, got m = {m}")));
    }
    let raw: Vec<f64> = (0..w.nrows())
        .map(|i| (0..m).map(|j| eigenvalues[j] * w[(i, j)] * w[(i, j)]).sum())
        .collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    let normalized = if max > 0.0 {
        raw.iter().map(|s| s / max).collect()
    } else {
        vec![0.0; raw.len()]
    };
    Ok(Sensitivities { raw, normalized })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(g: Vec<f64>) -> GradientSample {
        GradientSample {
            x: vec![0.0; g.len()],
            f: 0.0,
            g,
        }
    }

    #[test]
    fn zero_and_rank_one_matrices() {
        let c = estimate_c_matrix(&[sample(vec![0.0; 4]), sample(vec![0.0; 4])]).unwrap();
        assert_eq!(c, DMatrix::zeros(4, 4));
        let g = vec![1.0, -2.0, 0.5];
        let c = estimate_c_matrix(&[sample(g.clone())]).unwrap();
        let gg = DVector::from_vec(g.clone());
        assert_eq!(c, &gg * gg.transpose());
        assert_eq!(c.rank(1e-12), 1);
        assert!(estimate_c_matrix(&[]).is_err());
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let d = decompose(&DMatrix::identity(5, 5), 2).unwrap();
        assert!(d.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-14));
        let diag: Vec<f64> = (1..=6).rev().map(|v| v as f64).collect();
        let d = decompose(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 6.0, 1.0, 4.0, 5.0, 3.0])), 3).unwrap();
        assert_eq!(d.eigenvalues, diag);
        let order = [1, 4, 3, 5, 0, 2];
        for (col, &row) in order.iter().enumerate() {
            assert_eq!(d.eigenvectors[(row, col)], 1.0);
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let mut c = DMatrix::identity(3, 3);
        c[(0, 1)] = 1e-3;
        assert!(decompose(&c, 1).is_err());
        assert!(decompose(&DMatrix::identity(3, 3), 3).is_err());
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let d = decompose(&a, 1).unwrap();
        for j in 0..3 {
            let col = d.eigenvectors.column(j);
            let pivot = col.iamax();
            assert!(col[pivot] > 0.0);
        }
        let wtw = d.eigenvectors.tr_mul(&d.eigenvectors);
        assert!((wtw - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn bootstrap_of_identical_samples_has_zero_width() {
        let s: Vec<GradientSample> = (0..20).map(|_| sample(vec![1.0, 2.0, 3.0])).collect();
        let bands = bootstrap_bands(&s, 100, 1).unwrap();
        for (lo, hi) in bands {
            assert!((hi - lo).abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_bands_contain_point_estimate() {
        let s: Vec<GradientSample> = (0..50)
            .map(|i| sample(vec![(i as f64).sin(), (i as f64 * 0.7).cos(), 0.3 * (i as f64).sqrt()]))
            .collect();
        let (point, _) = sorted_eigen(&estimate_c_matrix(&s).unwrap()).unwrap();
        let bands = bootstrap_bands(&s, 200, 7).unwrap();
        for (l, (lo, hi)) in point.iter().zip(bands) {
            assert!(lo <= *l && *l <= hi);
            assert!(hi > lo);
        }
        assert_eq!(bootstrap_bands(&s, 100, 3).unwrap(), bootstrap_bands(&s, 100, 3).unwrap());
    }

    #[test]
    fn sensitivities_of_simple_spectra() {
        let mut w = DMatrix::identity(6, 6);
        w.swap_columns(0, 4);
        let s = global_sensitivities(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &w, 6).unwrap();
        assert_eq!(s.normalized, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

        let diag = [4.0, 3.0, 2.5, 1.0, 0.2];
        let c = DMatrix::from_diagonal(&DVector::from_row_slice(&diag));
        let d = decompose(&c, 2).unwrap();
        let s = global_sensitivities(&d.eigenvalues, &d.eigenvectors, 5).unwrap();
        for (si, di) in s.raw.iter().zip(diag) {
            assert!((si - di).abs() < 1e-14);
        }
        let z = global_sensitivities(&[0.0; 6], &w, 6).unwrap();
        assert!(z.normalized.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn csv_roundtrip() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let mut d = decompose(&a, 1).unwrap();
        d.bands = Some(d.eigenvalues.iter().map(|l| (l * 0.9, l * 1.1)).collect());
        let dir = tempfile::tempdir().unwrap();
        let (pv, pw) = (dir.path().join("vals.csv"), dir.path().join("vecs.csv"));
        d.write(&pv, &pw, &["a", "b", "c"]).unwrap();
        assert_eq!(SubspaceDecomposition::read(&pv, &pw, 1).unwrap(), d);
    }
}
