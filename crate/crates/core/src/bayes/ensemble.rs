use std::path::Path;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::params::{to_physical, CalibrationVector, PhysicalParams, PriorSpec, N_PARAMS, PHYSICAL_NAMES};

/// Full-space posterior samples with their active/inactive provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEnsemble {
    pub x: Vec<CalibrationVector>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    /// Effective sample size of the active chain.
    pub ess: f64,
    pub stride: usize,
}

impl PosteriorEnsemble {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn physical(&self, prior: &PriorSpec) -> Result<Vec<PhysicalParams>> {
        self.x.iter().map(|x| to_physical(x, prior)).collect()
    }

    /// Per-coordinate mean and standard deviation of the calibration vectors.
    pub fn calibration_moments(&self) -> Vec<(f64, f64)> {
        moments(self.x.iter().map(|x| x.as_slice()), N_PARAMS)
    }

    /// The physical-parameter columns followed by `y_1..y_k` and
    /// `z_1..z_(n-k)`.
    pub fn to_csv(&self, prior: &PriorSpec) -> Result<String> {
        let k = self.y.first().map_or(0, Vec::len);
        let m = self.z.first().map_or(0, Vec::len);
        let mut header: Vec<String> = PHYSICAL_NAMES.iter().map(|s| s.to_string()).collect();
        header.extend((1..=k).map(|j| format!("y_{j}")));
        header.extend((1..=m).map(|j| format!("z_{j}")));
        let mut out = header.join(",");
        out.push('\n');
        for (i, x) in self.x.iter().enumerate() {
            let p = to_physical(x, prior)?;
            let row: Vec<String> = p
                .to_array()
                .iter()
                .chain(&self.y[i])
                .chain(&self.z[i])
                .map(|v| fmt_f64(*v))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, prior: &PriorSpec) -> Result<()> {
        crate::io::write_string(path, &self.to_csv(prior)?)
    }
}

/// Mean and standard deviation (n - 1 denominator) per coordinate.
pub fn moments<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Vec<(f64, f64)> {
    let n = rows.clone().count() as f64;
    (0..dim)
        .map(|j| {
            let mean = rows.clone().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.clone().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (mean, var.sqrt())
        })
        .collect()
}

/// Reads the physical-parameter columns of an ensemble CSV.
pub fn read_ensemble_physical(path: impl AsRef<Path>) -> Result<Vec<PhysicalParams>> {
    let path = path.as_ref();
    let table = crate::io::read_table(path, &PHYSICAL_NAMES)?;
    if table.rows.is_empty() {
        return Err(Error::parse(path, 1, "ensemble has no samples"));
    }
    table
        .rows
        .iter()
        .map(|row| {
            let mut a = [0.0; N_PARAMS];
            for (i, v) in a.iter_mut().enumerate() {
                *v = row.float(path, i)?;
            }
            let p = PhysicalParams::from_array(a);
            p.validate().map_err(|e| Error::parse(path, row.line, e.to_string()))?;
            Ok(p)
        })
        .collect()
}
