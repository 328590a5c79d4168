use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::subspace::SubspaceDecomposition;

/// Points this far outside the box are rejected by [`lift`]; smaller
/// excursions are round-off and clamped.
pub const LIFT_TOLERANCE: f64 = 1e-9;
/// Slack allowed on `W1^T x = y` when searching for a start point.
const FEASIBILITY_TOL: f64 = 1e-10;
const TARGET_ACCEPTANCE: f64 = 0.25;

/// Random-walk settings of the inactive-variable chains.
#[derive(Debug, Clone, PartialEq)]
pub struct InactiveSettings {
    pub burn_in: usize,
    /// Steps between retained samples.
    pub thin: usize,
    pub proposal_std: f64,
}

impl Default for InactiveSettings {
    fn default() -> Self {
        InactiveSettings {
            burn_in: 1000,
            thin: 10,
            proposal_std: 0.3,
        }
    }
}

/// The active/inactive bases of a decomposition, ready for slice sampling.
#[derive(Debug, Clone)]
pub struct SliceBasis {
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
}

impl SliceBasis {
    pub fn new(decomposition: &SubspaceDecomposition) -> Self {
        SliceBasis {
            w1: decomposition.w1(),
            w2: decomposition.w2(),
        }
    }

    pub fn from_parts(w1: DMatrix<f64>, w2: DMatrix<f64>) -> Result<Self> {
        if w1.nrows() != w2.nrows() || w1.ncols() + w2.ncols() != w1.nrows() {
            return Err(Error::InvalidInput(format!(
                "bases of shape {}x{} and {}x{} do not split the space",
                w1.nrows(),
                w1.ncols(),
                w2.nrows(),
                w2.ncols()
            )));
        }
        Ok(SliceBasis { w1, w2 })
    }

    fn full(&self, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        &self.w1 * y + &self.w2 * z
    }

    /// A point `z` with `W1 y + W2 z` in the box, chosen as deep inside
    /// the box as the slice allows (a small linear program).
    pub fn feasible_point(&self, y: &[f64]) -> Result<Vec<f64>> {
        let k = self.w1.ncols();
        if y.len() != k {
            return Err(Error::InvalidInput(format!("active point has {} coordinates, expected {k}", y.len())));
        }
        let n = self.w1.nrows();
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let xs: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (-1.0, 1.0))).collect();
        let depth = lp.add_var(1.0, (0.0, 1.0));
        for &x in &xs {
            lp.add_constraint([(x, 1.0), (depth, 1.0)], ComparisonOp::Le, 1.0);
            lp.add_constraint([(x, -1.0), (depth, 1.0)], ComparisonOp::Le, 1.0);
        }
        for (j, yj) in y.iter().enumerate() {
            let row: Vec<_> = xs.iter().enumerate().map(|(i, &x)| (x, self.w1[(i, j)])).collect();
            lp.add_constraint(row.as_slice(), ComparisonOp::Le, yj + FEASIBILITY_TOL);
            lp.add_constraint(row.as_slice(), ComparisonOp::Ge, yj - FEASIBILITY_TOL);
        }
        let infeasible =
            || Error::InvalidInput(format!("active point {y:?} is infeasible: its slice of the parameter box is empty"));
        let solution = match lp.solve() {
            Ok(outcome) => outcome.into_solution().map_err(|_| infeasible())?,
            Err(microlp::Error::Infeasible) => return Err(infeasible()),
            Err(e) => return Err(Error::Numerical(format!("slice start point: {e}"))),
        };
        let x = DVector::from_iterator(n, xs.iter().map(|&v| solution.var_value(v).clamp(-1.0, 1.0)));
        Ok(self.w2.tr_mul(&x).as_slice().to_vec())
    }

    /// Random walk on `z` targeting the uniform density on the slice.
    pub fn sample(&self, y: &[f64], n_z: usize, settings: &InactiveSettings, seed: u64) -> Result<Vec<Vec<f64>>> {
        if settings.thin == 0 || !(settings.proposal_std > 0.0) {
            return Err(Error::Config("inactive sampler needs a positive stride and step".into()));
        }
        let z0 = self.feasible_point(y)?;
        let yv = DVector::from_column_slice(y);
        let base = &self.w1 * &yv;
        let inside = |z: &DVector<f64>| (&base + &self.w2 * z).amax() <= 1.0;
        let mut z = DVector::from_vec(z0);
        if self.w2.ncols() == 0 {
            return Ok(vec![Vec::new(); n_z]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut log_sigma = settings.proposal_std.ln();
        let mut out = Vec::with_capacity(n_z);
        let total = settings.burn_in + n_z * settings.thin;
        for step in 0..total {
            let sigma = log_sigma.exp();
            let cand = z.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
            let accept = inside(&cand);
            if accept {
                z = cand;
            }
            if step < settings.burn_in {
                log_sigma += (accept as u8 as f64 - TARGET_ACCEPTANCE) / ((step + 1) as f64).powf(0.6);
            } else if (step + 1 - settings.burn_in).is_multiple_of(settings.thin) {
                out.push(z.as_slice().to_vec());
            }
        }
        Ok(out)
    }

    /// `x = W1 y + W2 z`, which must lie in the box.
    pub fn lift(&self, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.w1.ncols() || z.len() != self.w2.ncols() {
            return Err(Error::InvalidInput(format!(
                "lift of ({}, {}) coordinates with bases of width ({}, {})",
                y.len(),
                z.len(),
                self.w1.ncols(),
                self.w2.ncols()
            )));
        }
        let x = self.full(&DVector::from_column_slice(y), &DVector::from_column_slice(z));
        if let Some(i) = x.iter().position(|v| v.abs() > 1.0 + LIFT_TOLERANCE) {
            return Err(Error::Domain { index: i, value: x[i] });
        }
        Ok(x.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }
}

/// `n_z` draws of the inactive variable given the active point `y`.
pub fn sample_inactive(
    y: &[f64],
    decomposition: &SubspaceDecomposition,
    n_z: usize,
    settings: &InactiveSettings,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    SliceBasis::new(decomposition).sample(y, n_z, settings, seed)
}

pub fn lift(y: &[f64], z: &[f64], decomposition: &SubspaceDecomposition) -> Result<Vec<f64>> {
    SliceBasis::new(decomposition).lift(y, z)
}
