use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Upper limit on the number of facet candidates enumerated.
const MAX_FACETS: usize = 2_000_000;

/// The image `W1^T [-1, 1]^n` of the prior box: a zonotope described by its
/// facet normals `u` and support values `h(u) = sum_i |u . w_i|`, where `w_i`
/// are the rows of `W1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedBox {
    dim: usize,
    normals: Vec<f64>,
    bounds: Vec<f64>,
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    for i in (0..r).rev() {
        if idx[i] < n - r + i {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: usize, r: usize) -> usize {
    (0..r).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

impl ProjectedBox {
    pub fn new(w1: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = (w1.nrows(), w1.ncols());
        if k == 0 || k > n {
            return Err(Error::InvalidInput(format!("cannot project a {n}-box onto {k} dimensions")));
        }
        if binomial(n, k - 1) > MAX_FACETS {
            return Err(Error::Config(format!("a {k}-dimensional projection of a {n}-box has too many facets")));
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|i| w1.row(i).iter().copied().collect()).collect();
        let scale = rows.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let mut normals = Vec::new();
        let mut bounds = Vec::new();
        let mut push = |u: &[f64]| {
            let h: f64 = rows.iter().map(|r| r.iter().zip(u).map(|(a, b)| a * b).sum::<f64>().abs()).sum();
            normals.extend_from_slice(u);
            bounds.push(h);
        };
        if k == 1 {
            push(&[1.0]);
        } else {
            let mut idx: Vec<usize> = (0..k - 1).collect();
            let mut minor = DMatrix::<f64>::zeros(k - 1, k - 1);
            let mut u = vec![0.0; k];
            loop {
                // Generalised cross product of the chosen rows.
                for (j, uj) in u.iter_mut().enumerate() {
                    for (a, &row) in idx.iter().enumerate() {
                        for (b, col) in (0..k).filter(|c| *c != j).enumerate() {
                            minor[(a, b)] = rows[row][col];
                        }
                    }
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    *uj = sign * minor.determinant();
                }
                let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-10 * scale.powi(k as i32 - 1) {
                    u.iter_mut().for_each(|v| *v /= norm);
                    push(&u);
                }
                if !next_combination(&mut idx, n) {
                    break;
                }
            }
        }
        if bounds.is_empty() {
            return Err(Error::Numerical("projection matrix has rank below its column count".into()));
        }
        Ok(ProjectedBox { dim: k, normals, bounds })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facet_count(&self) -> usize {
        self.bounds.len()
    }

    /// Smallest `h(u) - |u . y|` over the facets; negative outside.
    pub fn margin(&self, y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.dim, "point of the wrong dimension");
        self.normals
            .chunks_exact(self.dim)
            .zip(&self.bounds)
            .map(|(u, h)| h - u.iter().zip(y).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.margin(y) >= -1e-12
    }
}
