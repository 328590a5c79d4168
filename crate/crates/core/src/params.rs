//! Normalized calibration coordinates, prior bounds and the coupled
//! transform onto constrained physical parameters.
//!
//! The 21 calibration coordinates are ordered per hydrotope block:
//!
//! ```text
//! Hyd 1:  k_hyd(log)  e_min  de  alpha  k_is(log)  k_sec(log)  e_sec
//! Hyd 2:  the same seven slots as [0,1] fractions coupled to Hyd 1
//! Hyd 3:  the same seven slots as [0,1] fractions coupled to Hyd 2
//! ```
//!
//! Every coordinate lives on `[-1, 1]`. The physical ordering constraints
//! between hydrotopes hold for every point of the cube.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::N_HYDROTOPES;

pub const N_SLOTS: usize = 7;
pub const N_PARAMS: usize = N_HYDROTOPES * N_SLOTS;

/// Physical parameter names in table order (`k_hyd, e_min, e_max, alpha,
/// k_is, k_sec, e_sec` for each hydrotope).
pub const PHYSICAL_NAMES: [&str; N_PARAMS] = [
    "k_hyd_1", "e_min_1", "e_max_1", "alpha_1", "k_is_1", "k_sec_1", "e_sec_1",
    "k_hyd_2", "e_min_2", "e_max_2", "alpha_2", "k_is_2", "k_sec_2", "e_sec_2",
    "k_hyd_3", "e_min_3", "e_max_3", "alpha_3", "k_is_3", "k_sec_3", "e_sec_3",
];

/// Calibration coordinate names in vector order.
pub const CALIBRATION_NAMES: [&str; N_PARAMS] = [
    "k_hyd_1", "e_min_1", "de_1", "alpha_1", "k_is_1", "k_sec_1", "e_sec_1",
    "dk_hyd_12", "de_min_12", "de_2", "dalpha_12", "dk_is_12", "dk_sec_12", "de_sec_12",
    "dk_hyd_23", "de_min_23", "de_3", "dalpha_23", "dk_is_23", "dk_sec_23", "de_sec_23",
];

const UNITS: [&str; N_SLOTS] = ["m2/d", "mm", "mm", "-", "m/mm/d", "m/mm/d", "mm"];

/// Direction of the cross-hydrotope ordering for a parameter slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chain {
    /// `p_1 >= p_2 >= p_3`
    Decreasing,
    /// `p_1 <= p_2 <= p_3`
    Increasing,
}

const SLOT_CHAIN: [Chain; N_SLOTS] = [
    Chain::Decreasing, // k_hyd
    Chain::Increasing, // e_min
    Chain::Increasing, // e_max
    Chain::Decreasing, // alpha
    Chain::Decreasing, // k_is
    Chain::Decreasing, // k_sec
    Chain::Increasing, // e_sec
];

const E_MIN: usize = 1;
const E_MAX: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(Scale::Linear),
            "log" => Ok(Scale::Log),
            other => Err(Error::InvalidInput(format!("unknown scale `{other}`"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Linear => "linear",
            Scale::Log => "log",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorEntry {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub unit: String,
    pub scale: Scale,
}

impl PriorEntry {
    fn lo(&self) -> f64 {
        self.to_scale(self.lb)
    }

    fn hi(&self) -> f64 {
        self.to_scale(self.ub)
    }

    fn to_scale(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log => v.ln(),
        }
    }

    fn from_scale(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log => v.exp(),
        }
    }
}

/// Prior intervals for the 21 physical parameters, in table order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    entries: Vec<PriorEntry>,
}

impl PriorSpec {
    /// The Kerschbaum prior intervals; `k`-type parameters on a log scale.
    pub fn kerschbaum() -> Self {
        #[rustfmt::skip]
        let bounds: [(f64, f64); N_PARAMS] = [
            (9.0, 900.0), (10.0, 50.0), (15.0, 75.0), (0.7, 1.6), (0.002, 0.2), (0.0095, 0.95), (25.0, 70.0),
            (8.5, 850.0), (40.0, 80.0), (80.0, 160.0), (0.5, 1.3), (0.00055, 0.055), (0.0023, 0.23), (130.0, 220.0),
            (7.7, 770.0), (75.0, 120.0), (160.0, 255.0), (0.2, 0.7), (0.00025, 0.025), (0.0015, 0.15), (320.0, 450.0),
        ];
        let entries = bounds
            .iter()
            .enumerate()
            .map(|(i, &(lb, ub))| {
                let slot = i % N_SLOTS;
                PriorEntry {
                    name: PHYSICAL_NAMES[i].to_string(),
                    lb,
                    ub,
                    unit: UNITS[slot].to_string(),
                    scale: if matches!(slot, 0 | 4 | 5) { Scale::Log } else { Scale::Linear },
                }
            })
            .collect();
        PriorSpec { entries }
    }

    pub fn new(entries: Vec<PriorEntry>) -> Result<Self> {
        let spec = PriorSpec { entries };
        spec.validate()?;
        Ok(spec)
    }

    pub fn entries(&self) -> &[PriorEntry] {
        &self.entries
    }

    fn entry(&self, hyd: usize, slot: usize) -> &PriorEntry {
        &self.entries[hyd * N_SLOTS + slot]
    }

    /// Bounds of `e_max - e_min` for a hydrotope.
    pub fn delta_e_bounds(&self, hyd: usize) -> (f64, f64) {
        let lo = self.entry(hyd, E_MAX).lb - self.entry(hyd, E_MIN).lb;
        let hi = self.entry(hyd, E_MAX).ub - self.entry(hyd, E_MIN).ub;
        (lo, hi)
    }

    /// Checks the bounds are ordered and compatible with the coupling so that
    /// every calibration vector maps to a constraint-satisfying point.
    pub fn validate(&self) -> Result<()> {
        if self.entries.len() != N_PARAMS {
            return Err(Error::InvalidInput(format!(
                "prior needs {N_PARAMS} rows, found {}",
                self.entries.len()
            )));
        }
        for (e, want) in self.entries.iter().zip(PHYSICAL_NAMES) {
            if e.name != want {
                return Err(Error::InvalidInput(format!(
                    "prior row `{}` found where `{want}` was expected",
                    e.name
                )));
            }
            if !(e.lb < e.ub) || !e.lb.is_finite() || !e.ub.is_finite() {
                return Err(Error::InvalidInput(format!("{}: need lb < ub", e.name)));
            }
            if e.scale == Scale::Log && e.lb <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{}: log scale needs positive bounds",
                    e.name
                )));
            }
        }
        for hyd in 0..N_HYDROTOPES {
            let (lo, hi) = self.delta_e_bounds(hyd);
            if !(0.0 < lo && lo <= hi) {
                return Err(Error::InvalidInput(format!(
                    "hydrotope {}: e_max/e_min bounds give an empty or non-positive gap range [{lo}, {hi}]",
                    hyd + 1
                )));
            }
        }
        for hyd in 1..N_HYDROTOPES {
            for slot in 0..N_SLOTS {
                let (prev, cur) = (self.entry(hyd - 1, slot), self.entry(hyd, slot));
                let ok = match (slot, SLOT_CHAIN[slot]) {
                    (E_MAX, _) => prev.ub <= cur.lb,
                    (_, Chain::Decreasing) => cur.lb <= prev.lb,
                    (_, Chain::Increasing) => prev.ub <= cur.ub,
                };
                if !ok {
                    return Err(Error::InvalidInput(format!(
                        "bounds of {} and {} cannot be coupled into an ordered chain",
                        prev.name, cur.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Table layout: `name lb ub unit scale`, whitespace separated, `#` comments.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() == 5 && cols[0] == "name" {
                continue;
            }
            if cols.len() != 5 {
                return Err(Error::parse(origin, i + 1, format!("expected 5 columns, found {}", cols.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(origin, i + 1, format!("`{s}` is not a number")))
            };
            entries.push(PriorEntry {
                name: cols[0].to_string(),
                lb: num(cols[1])?,
                ub: num(cols[2])?,
                unit: cols[3].to_string(),
                scale: cols[4]
                    .parse()
                    .map_err(|e: Error| Error::parse(origin, i + 1, e.to_string()))?,
            });
        }
        PriorSpec::new(entries)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<10} {:>10} {:>10} {:>8} {:>7}\n", "name", "lb", "ub", "unit", "scale");
        for e in &self.entries {
            out.push_str(&format!(
                "{:<10} {:>10} {:>10} {:>8} {:>7}\n",
                e.name, e.lb, e.ub, e.unit, e.scale
            ));
        }
        out
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self::kerschbaum()
    }
}

/// Normalized independent calibration coordinates on `[-1, 1]^21`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationVector(pub [f64; N_PARAMS]);

impl CalibrationVector {
    pub fn new(x: [f64; N_PARAMS]) -> Result<Self> {
        let v = CalibrationVector(x);
        v.check_domain()?;
        Ok(v)
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        let arr: [f64; N_PARAMS] = x.try_into().map_err(|_| {
            Error::InvalidInput(format!("calibration vector needs {N_PARAMS} entries, got {}", x.len()))
        })?;
        Self::new(arr)
    }

    pub fn center() -> Self {
        CalibrationVector([0.0; N_PARAMS])
    }

    pub fn check_domain(&self) -> Result<()> {
        match self.0.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
            Some((index, &value)) => Err(Error::Domain { index, value }),
            None => Ok(()),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Parameters of one hydrotope bucket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydrotopeParams {
    /// Quickflow discharge parameter, m²/d.
    pub k_hyd: f64,
    /// Quickflow deactivation level, mm.
    pub e_min: f64,
    /// Quickflow activation level, mm.
    pub e_max: f64,
    pub alpha: f64,
    /// Recharge coefficient to the baseflow storage.
    pub k_is: f64,
    /// Secondary spring discharge coefficient.
    pub k_sec: f64,
    /// Secondary spring activation level, mm.
    pub e_sec: f64,
}

impl HydrotopeParams {
    fn to_array(self) -> [f64; N_SLOTS] {
        [self.k_hyd, self.e_min, self.e_max, self.alpha, self.k_is, self.k_sec, self.e_sec]
    }

    fn from_array(a: [f64; N_SLOTS]) -> Self {
        HydrotopeParams {
            k_hyd: a[0],
            e_min: a[1],
            e_max: a[2],
            alpha: a[3],
            k_is: a[4],
            k_sec: a[5],
            e_sec: a[6],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter(format!("hydrotope parameters must be positive: {self:?}")));
        }
        if self.e_max <= self.e_min {
            return Err(Error::InvalidParameter(format!(
                "e_max ({}) must exceed e_min ({})",
                self.e_max, self.e_min
            )));
        }
        Ok(())
    }
}

/// The three hydrotope parameter blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub hydrotopes: [HydrotopeParams; N_HYDROTOPES],
}

impl PhysicalParams {
    /// Values in table order.
    pub fn to_array(&self) -> [f64; N_PARAMS] {
        let mut out = [0.0; N_PARAMS];
        for (h, p) in self.hydrotopes.iter().enumerate() {
            out[h * N_SLOTS..(h + 1) * N_SLOTS].copy_from_slice(&p.to_array());
        }
        out
    }

    pub fn from_array(a: [f64; N_PARAMS]) -> Self {
        let block = |h: usize| {
            let mut s = [0.0; N_SLOTS];
            s.copy_from_slice(&a[h * N_SLOTS..(h + 1) * N_SLOTS]);
            HydrotopeParams::from_array(s)
        };
        PhysicalParams {
            hydrotopes: [block(0), block(1), block(2)],
        }
    }

    /// Positivity, `e_max > e_min` and the ordering constraints.
    pub fn validate(&self) -> Result<()> {
        for h in &self.hydrotopes {
            h.validate()?;
        }
        let violations = check_constraints(self);
        if violations.is_empty() {
            Ok(())
        } else {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidParameter(format!("constraint violations: {}", list.join("; "))))
        }
    }
}

/// A violated ordering relation such as `k_hyd_2 >= k_hyd_3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintViolation {
    pub left: &'static str,
    pub relation: &'static str,
    pub right: &'static str,
    pub left_value: f64,
    pub right_value: f64,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} violated ({} vs {})",
            self.left, self.relation, self.right, self.left_value, self.right_value
        )
    }
}

/// All violated relations, ordered by parameter slot then hydrotope, followed
/// by the per-hydrotope `e_min <= e_max` relations.
pub fn check_constraints(p: &PhysicalParams) -> Vec<ConstraintViolation> {
    let a = p.to_array();
    let mut out = Vec::new();
    for (slot, chain) in SLOT_CHAIN.iter().enumerate() {
        for h in 1..N_HYDROTOPES {
            let (i, j) = ((h - 1) * N_SLOTS + slot, h * N_SLOTS + slot);
            let (ok, rel) = match chain {
                Chain::Decreasing => (a[i] >= a[j], ">="),
                Chain::Increasing => (a[i] <= a[j], "<="),
            };
            if !ok {
                out.push(ConstraintViolation {
                    left: PHYSICAL_NAMES[i],
                    relation: rel,
                    right: PHYSICAL_NAMES[j],
                    left_value: a[i],
                    right_value: a[j],
                });
            }
        }
    }
    for h in 0..N_HYDROTOPES {
        let (i, j) = (h * N_SLOTS + E_MIN, h * N_SLOTS + E_MAX);
        if !(a[i] <= a[j]) {
            out.push(ConstraintViolation {
                left: PHYSICAL_NAMES[i],
                relation: "<=",
                right: PHYSICAL_NAMES[j],
                left_value: a[i],
                right_value: a[j],
            });
        }
    }
    out
}

fn unit(x: f64) -> f64 {
    0.5 * (x + 1.0)
}

/// Maps calibration coordinates to physical parameters.
///
/// Hydrotope 1 coordinates map affinely onto their (log) intervals. For
/// hydrotopes 2 and 3 each coordinate is a fraction `dp` of the interval left
/// open by the previous hydrotope:
///
/// ```text
/// decreasing:  p_i = lb + dp * (min(ub, p_{i-1}) - lb)
/// increasing:  p_i = max(p_{i-1}, lb) + dp * (ub - max(p_{i-1}, lb))
/// ```
///
/// with `k`-type parameters coupled in log space. `e_max = e_min + de` with
/// `de` spanning `[e_max_lb - e_min_lb, e_max_ub - e_min_ub]`; `e_min` is
/// coupled first.
pub fn to_physical(x: &CalibrationVector, prior: &PriorSpec) -> Result<PhysicalParams> {
    x.check_domain()?;
    let mut scaled = [[0.0; N_SLOTS]; N_HYDROTOPES];
    for h in 0..N_HYDROTOPES {
        for slot in 0..N_SLOTS {
            let u = unit(x.0[h * N_SLOTS + slot]);
            let e = prior.entry(h, slot);
            scaled[h][slot] = if slot == E_MAX {
                let (lo, hi) = prior.delta_e_bounds(h);
                scaled[h][E_MIN] + lo + u * (hi - lo)
            } else if h == 0 {
                e.lo() + u * (e.hi() - e.lo())
            } else {
                let prev = scaled[h - 1][slot];
                match SLOT_CHAIN[slot] {
                    Chain::Decreasing => e.lo() + u * (e.hi().min(prev) - e.lo()),
                    Chain::Increasing => {
                        let base = prev.max(e.lo());
                        base + u * (e.hi() - base)
                    }
                }
            };
        }
    }
    let mut out = [0.0; N_PARAMS];
    for h in 0..N_HYDROTOPES {
        for slot in 0..N_SLOTS {
            out[h * N_SLOTS + slot] = prior.entry(h, slot).from_scale(scaled[h][slot]);
        }
    }
    Ok(PhysicalParams::from_array(out))
}

/// Inverse of [`to_physical`]. Where a coupled interval has collapsed to a
/// point the fraction is undetermined and reported as `-1`.
pub fn to_calibration(p: &PhysicalParams, prior: &PriorSpec) -> Result<CalibrationVector> {
    let a = p.to_array();
    let mut scaled = [[0.0; N_SLOTS]; N_HYDROTOPES];
    for h in 0..N_HYDROTOPES {
        for slot in 0..N_SLOTS {
            scaled[h][slot] = prior.entry(h, slot).to_scale(a[h * N_SLOTS + slot]);
        }
    }
    let frac = |v: f64, lo: f64, hi: f64| {
        if hi - lo <= 0.0 {
            0.0
        } else {
            (v - lo) / (hi - lo)
        }
    };
    let mut x = [0.0; N_PARAMS];
    for h in 0..N_HYDROTOPES {
        for slot in 0..N_SLOTS {
            let e = prior.entry(h, slot);
            let v = scaled[h][slot];
            let u = if slot == E_MAX {
                let (lo, hi) = prior.delta_e_bounds(h);
                frac(a[h * N_SLOTS + E_MAX] - a[h * N_SLOTS + E_MIN], lo, hi)
            } else if h == 0 {
                frac(v, e.lo(), e.hi())
            } else {
                let prev = scaled[h - 1][slot];
                match SLOT_CHAIN[slot] {
                    Chain::Decreasing => frac(v, e.lo(), e.hi().min(prev)),
                    Chain::Increasing => frac(v, prev.max(e.lo()), e.hi()),
                }
            };
            x[h * N_SLOTS + slot] = 2.0 * u - 1.0;
        }
    }
    CalibrationVector::new(x).map_err(|e| Error::InvalidParameter(format!("parameters outside the prior support: {e}")))
}

/// I.i.d. uniform draws on `[-1, 1]^21`.
pub fn sample_prior(n: usize, seed: u64) -> Vec<CalibrationVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_prior_with(n, &mut rng)
}

pub fn sample_prior_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<CalibrationVector> {
    (0..n)
        .map(|_| {
            let mut x = [0.0; N_PARAMS];
            for v in &mut x {
                *v = rng.random_range(-1.0..=1.0);
            }
            CalibrationVector(x)
        })
        .collect()
}

/// Writes calibration vectors as CSV with the named coordinate columns.
pub fn write_calibration_csv(path: impl AsRef<Path>, xs: &[CalibrationVector]) -> Result<()> {
    let mut out = CALIBRATION_NAMES.join(",");
    out.push('\n');
    for x in xs {
        let row: Vec<String> = x.0.iter().map(|v| crate::io::fmt_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    crate::io::write_string(path, &out)
}

pub fn read_calibration_csv(path: impl AsRef<Path>) -> Result<Vec<CalibrationVector>> {
    let path = path.as_ref();
    let table = crate::io::read_table(path, &CALIBRATION_NAMES)?;
    table
        .rows
        .iter()
        .map(|row| {
            let mut x = [0.0; N_PARAMS];
            for (i, v) in x.iter_mut().enumerate() {
                *v = row.float(path, i)?;
            }
            CalibrationVector::new(x).map_err(|e| Error::parse(path, row.line, e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior() -> PriorSpec {
        PriorSpec::kerschbaum()
    }

    #[test]
    fn kerschbaum_prior_is_valid() {
        prior().validate().unwrap();
    }

    #[test]
    fn center_of_log_interval_is_geometric_mean() {
        let p = to_physical(&CalibrationVector::center(), &prior()).unwrap();
        assert!((p.hydrotopes[0].k_hyd - 90.0).abs() < 1e-10);
    }

    #[test]
    fn delta_e_bounds_follow_table() {
        assert_eq!(prior().delta_e_bounds(0), (5.0, 25.0));
        assert_eq!(prior().delta_e_bounds(1), (40.0, 80.0));
        assert_eq!(prior().delta_e_bounds(2), (85.0, 135.0));
    }

    #[test]
    fn lower_corner_sits_on_lower_bounds() {
        let pr = prior();
        let p = to_physical(&CalibrationVector([-1.0; N_PARAMS]), &pr).unwrap();
        let a = p.to_array();
        for h in 0..N_HYDROTOPES {
            for slot in [0, 3, 4, 5] {
                let i = h * N_SLOTS + slot;
                assert!((a[i] - pr.entries[i].lb).abs() < 1e-12 * pr.entries[i].lb.abs().max(1.0), "{}", PHYSICAL_NAMES[i]);
            }
            // increasing chains at dp = 0 land on max(previous, lb) which is lb here
            assert_eq!(a[h * N_SLOTS + E_MIN], pr.entries[h * N_SLOTS + E_MIN].lb);
            assert_eq!(a[h * N_SLOTS + 6], pr.entries[h * N_SLOTS + 6].lb);
            let (lo, _) = pr.delta_e_bounds(h);
            assert!((a[h * N_SLOTS + E_MAX] - a[h * N_SLOTS + E_MIN] - lo).abs() < 1e-12);
        }
        assert!(check_constraints(&p).is_empty());
    }

    #[test]
    fn single_manual_violation_is_reported_once() {
        let mut p = to_physical(&CalibrationVector::center(), &prior()).unwrap();
        p.hydrotopes[2].k_hyd = p.hydrotopes[1].k_hyd * 1.5;
        let v = check_constraints(&p);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].left, v[0].right), ("k_hyd_2", "k_hyd_3"));
    }

    #[test]
    fn domain_error_outside_cube() {
        let mut x = [0.0; N_PARAMS];
        x[4] = 1.5;
        let err = to_physical(&CalibrationVector(x), &prior()).unwrap_err();
        assert!(matches!(err, Error::Domain { index: 4, .. }));
    }

    #[test]
    fn all_block_corners_satisfy_constraints() {
        let pr = prior();
        for block in 0..N_HYDROTOPES {
            for mask in 0u32..(1 << N_SLOTS) {
                for fill in [-1.0, 0.0, 1.0] {
                    let mut x = [fill; N_PARAMS];
                    for s in 0..N_SLOTS {
                        x[block * N_SLOTS + s] = if mask & (1 << s) != 0 { 1.0 } else { -1.0 };
                    }
                    let p = to_physical(&CalibrationVector(x), &pr).unwrap();
                    assert!(check_constraints(&p).is_empty(), "block {block} mask {mask:b}");
                    p.validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn interior_points_stay_strictly_inside() {
        let pr = prior();
        for x in sample_prior(2000, 3) {
            let mut y = x;
            for v in &mut y.0 {
                *v *= 0.999;
            }
            let p = to_physical(&y, &pr).unwrap().to_array();
            for (i, e) in pr.entries.iter().enumerate() {
                assert!(p[i] > e.lb && p[i] < e.ub, "{} = {} not in ({}, {})", e.name, p[i], e.lb, e.ub);
            }
        }
    }

    #[test]
    fn decreasing_coordinate_leaves_earlier_hydrotopes_alone() {
        let pr = prior();
        let base = sample_prior(1, 9)[0];
        let p0 = to_physical(&base, &pr).unwrap();
        for coord in [N_SLOTS, N_SLOTS + 3, 2 * N_SLOTS + 4] {
            let mut x = base;
            x.0[coord] = (x.0[coord] + 0.5).min(1.0);
            let p1 = to_physical(&x, &pr).unwrap();
            let h = coord / N_SLOTS;
            for earlier in 0..h {
                assert_eq!(p0.hydrotopes[earlier], p1.hydrotopes[earlier]);
            }
        }
    }

    #[test]
    fn sample_prior_is_seeded() {
        assert!(sample_prior(0, 1).is_empty());
        assert_eq!(sample_prior(10, 5), sample_prior(10, 5));
        assert_ne!(sample_prior(10, 5), sample_prior(10, 6));
    }

    #[test]
    fn prior_table_roundtrip() {
        let pr = prior();
        let back = PriorSpec::parse(&pr.to_table(), Path::new("prior.txt")).unwrap();
        assert_eq!(back, pr);
    }

    #[test]
    fn prior_rejects_uncouplable_bounds() {
        let mut pr = prior();
        pr.entries[7].lb = 20.0; // k_hyd_2 lower bound above k_hyd_1 lower bound
        assert!(pr.validate().is_err());
        let mut pr = prior();
        pr.entries[4].scale = Scale::Log;
        pr.entries[4].lb = -1.0;
        assert!(pr.validate().is_err());
    }
}
