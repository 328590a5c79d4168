//! The LuKARS bucket model: three hydrotopes with hysteretic quickflow,
//! linear recharge and secondary discharge, plus a shared linear baseflow
//! storage.
//!
//! Units: storage levels in mm, areas in m², fluxes in m³/d, one-day steps.
//! A coefficient times a level times an area (`k * e * a`) is in mm·m²/d,
//! i.e. litres per day, so the linear fluxes carry a factor `1e-3`.

use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::forcing::EffectiveInputSeries;
use crate::params::{HydrotopeParams, PhysicalParams};
use crate::N_HYDROTOPES;

/// m per mm.
pub const MM: f64 = 1e-3;
/// Seconds per day divided by litres per m³: m³/d → l/s.
pub const M3D_PER_LS: f64 = 86.4;
const DT: f64 = 1.0;

/// Fixed catchment geometry and the (uncalibrated) baseflow coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatchmentMeta {
    /// Hydrotope areas, m².
    pub areas: [f64; N_HYDROTOPES],
    /// Total recharge area, m².
    pub total_area: f64,
    /// Mean hydrotope distances to the spring, m.
    pub l_hyd: [f64; N_HYDROTOPES],
    /// Baseflow coefficient, 1/d.
    pub k_b: f64,
}

impl CatchmentMeta {
    pub const KEYS: [&'static str; 8] = [
        "area_total_m2", "area_1_m2", "area_2_m2", "area_3_m2", "l_hyd_1_m", "l_hyd_2_m", "l_hyd_3_m", "k_b",
    ];

    /// Synthetic-twin catchment: 2.5 km² with 13/56/27 % hydrotope shares
    /// (the remaining 4 % does not drain to the spring), `l_hyd = 1000 m`,
    /// `k_b = 0.01 1/d`.
    pub fn synthetic_default() -> Self {
        let total = 2.5e6;
        CatchmentMeta {
            areas: [0.13 * total, 0.56 * total, 0.27 * total],
            total_area: total,
            l_hyd: [1000.0; N_HYDROTOPES],
            k_b: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.areas.iter().chain(&self.l_hyd).chain([&self.total_area, &self.k_b]);
        if all.clone().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter(format!("catchment fields must be positive: {self:?}")));
        }
        let sum: f64 = self.areas.iter().sum();
        if sum > self.total_area * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "hydrotope areas sum to {sum} m², more than the total {} m²",
                self.total_area
            )));
        }
        Ok(())
    }

    /// Every key is required; no values are assumed.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut vals = [f64::NAN; 8];
        for (k, v, line) in crate::io::key_values(text, origin)? {
            let idx = Self::KEYS
                .iter()
                .position(|key| *key == k)
                .ok_or_else(|| Error::parse(origin, line, format!("unknown key `{k}`")))?;
            vals[idx] = v
                .parse()
                .map_err(|_| Error::parse(origin, line, format!("`{v}` is not a number")))?;
        }
        if let Some(i) = vals.iter().position(|v| v.is_nan()) {
            return Err(Error::Config(format!(
                "{}: missing required key `{}`",
                origin.display(),
                Self::KEYS[i]
            )));
        }
        let meta = CatchmentMeta {
            total_area: vals[0],
            areas: [vals[1], vals[2], vals[3]],
            l_hyd: [vals[4], vals[5], vals[6]],
            k_b: vals[7],
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let v = [
            self.total_area, self.areas[0], self.areas[1], self.areas[2], self.l_hyd[0], self.l_hyd[1],
            self.l_hyd[2], self.k_b,
        ];
        Self::KEYS
            .iter()
            .zip(v)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Storage levels and quickflow indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelState {
    pub levels: [f64; N_HYDROTOPES],
    pub baseflow_level: f64,
    pub active: [bool; N_HYDROTOPES],
}

impl ModelState {
    pub fn empty() -> Self {
        ModelState {
            levels: [0.0; N_HYDROTOPES],
            baseflow_level: 0.0,
            active: [false; N_HYDROTOPES],
        }
    }

    /// Hydrotopes start at `e_min` with quickflow off. The baseflow level is
    /// set so that `Q_b` equals `first_discharge` (m³/d) when given.
    pub fn initial(p: &PhysicalParams, meta: &CatchmentMeta, first_discharge: Option<f64>) -> Self {
        let baseflow_level = first_discharge
            .map(|q| (q / (meta.k_b * meta.total_area * MM)).max(0.0))
            .unwrap_or(0.0);
        ModelState {
            levels: std::array::from_fn(|i| p.hydrotopes[i].e_min),
            baseflow_level,
            active: [false; N_HYDROTOPES],
        }
    }
}

/// Fluxes of one step in m³/d.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Fluxes {
    pub q_hyd: [f64; N_HYDROTOPES],
    pub q_is: [f64; N_HYDROTOPES],
    pub q_sec: [f64; N_HYDROTOPES],
    pub q_b: f64,
}

impl Fluxes {
    /// Spring discharge: quickflow plus baseflow.
    pub fn spring(&self) -> f64 {
        self.q_hyd.iter().sum::<f64>() + self.q_b
    }
}

/// Hysteretic quickflow of hydrotope `i` in m³/d:
/// `eps * (max(0, e - e_min) / (e_max - e_min))^alpha * k_hyd / l_hyd * a_i`.
pub fn quickflow(e: f64, active: bool, p: &HydrotopeParams, meta: &CatchmentMeta, i: usize) -> Result<f64> {
    if !(p.e_max > p.e_min) {
        return Err(Error::InvalidParameter(format!(
            "hydrotope {}: e_max ({}) must exceed e_min ({})",
            i + 1,
            p.e_max,
            p.e_min
        )));
    }
    Ok(quickflow_unchecked(e, active, p, meta, i))
}

#[inline]
fn quickflow_unchecked(e: f64, active: bool, p: &HydrotopeParams, meta: &CatchmentMeta, i: usize) -> f64 {
    if !active {
        return 0.0;
    }
    let fill = (e - p.e_min).max(0.0) / (p.e_max - p.e_min);
    fill.powf(p.alpha) * p.k_hyd / meta.l_hyd[i] * meta.areas[i]
}

/// `(Q_is, Q_sec)` of hydrotope `i` in m³/d.
#[inline]
pub fn linear_discharges(e: f64, p: &HydrotopeParams, meta: &CatchmentMeta, i: usize) -> (f64, f64) {
    let a = meta.areas[i] * MM;
    (p.k_is * e * a, p.k_sec * (e - p.e_sec).max(0.0) * a)
}

/// Hysteresis of the quickflow indicator: switches on when the level reaches
/// `e_max`, off when it falls to `e_min`.
#[inline]
pub fn update_indicator(active: bool, e_next: f64, p: &HydrotopeParams) -> bool {
    if active {
        e_next > p.e_min
    } else {
        e_next >= p.e_max
    }
}

/// One explicit daily step. Fluxes are evaluated on the pre-step levels and
/// returned alongside the new state.
pub fn step(
    state: &ModelState,
    source: &[f64; N_HYDROTOPES],
    p: &PhysicalParams,
    meta: &CatchmentMeta,
) -> (ModelState, Fluxes) {
    let mut next = *state;
    let mut fx = Fluxes::default();
    for i in 0..N_HYDROTOPES {
        let hp = &p.hydrotopes[i];
        let e = state.levels[i];
        let q_hyd = quickflow_unchecked(e, state.active[i], hp, meta, i);
        let (q_is, q_sec) = linear_discharges(e, hp, meta, i);
        let outflow = (q_sec + q_is + q_hyd) / (meta.areas[i] * MM);
        next.levels[i] = (e + (source[i] - outflow) * DT).max(0.0);
        next.active[i] = update_indicator(state.active[i], next.levels[i], hp);
        fx.q_hyd[i] = q_hyd;
        fx.q_is[i] = q_is;
        fx.q_sec[i] = q_sec;
    }
    let area = meta.total_area * MM;
    fx.q_b = meta.k_b * state.baseflow_level * area;
    let recharge: f64 = fx.q_is.iter().sum();
    next.baseflow_level = (state.baseflow_level + (recharge - fx.q_b) / area * DT).max(0.0);
    (next, fx)
}

/// Per-component discharge traces, m³/d.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComponentTraces {
    pub q_hyd: Vec<[f64; N_HYDROTOPES]>,
    pub q_is: Vec<[f64; N_HYDROTOPES]>,
    pub q_sec: Vec<[f64; N_HYDROTOPES]>,
    pub q_b: Vec<f64>,
    pub levels: Vec<[f64; N_HYDROTOPES]>,
    pub baseflow_level: Vec<f64>,
}

/// Daily spring discharge in m³/d.
#[derive(Debug, Clone, PartialEq)]
pub struct DischargeSeries {
    pub dates: Vec<NaiveDate>,
    pub total: Vec<f64>,
    pub components: Option<ComponentTraces>,
}

impl DischargeSeries {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    pub fn total_ls(&self) -> Vec<f64> {
        self.total.iter().map(|q| q / M3D_PER_LS).collect()
    }

    /// `date,q_total_m3d,q_total_ls` followed by component columns when present.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,q_total_m3d,q_total_ls");
        if self.components.is_some() {
            for kind in ["q_hyd", "q_is", "q_sec"] {
                for i in 1..=N_HYDROTOPES {
                    out.push_str(&format!(",{kind}_{i}_m3d"));
                }
            }
            out.push_str(",q_b_m3d");
        }
        out.push('\n');
        let f = crate::io::fmt_f64;
        for n in 0..self.len() {
            out.push_str(&format!("{},{},{}", self.dates[n], f(self.total[n]), f(self.total[n] / M3D_PER_LS)));
            if let Some(c) = &self.components {
                for trace in [&c.q_hyd, &c.q_is, &c.q_sec] {
                    for v in trace[n] {
                        out.push(',');
                        out.push_str(&f(v));
                    }
                }
                out.push(',');
                out.push_str(&f(c.q_b[n]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_string(path, &self.to_csv())
    }

    /// Reads the total discharge column of a discharge CSV.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let table = crate::io::read_table(path, &["date", "q_total_m3d"])?;
        let mut dates = Vec::with_capacity(table.rows.len());
        let mut total = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            dates.push(row.date(path, 0)?);
            let q = row.float(path, 1)?;
            if !(q.is_finite() && q >= 0.0) {
                return Err(Error::parse(path, row.line, format!("discharge {q} must be finite and >= 0")));
            }
            total.push(q);
        }
        Ok(DischargeSeries {
            dates,
            total,
            components: None,
        })
    }
}

/// Runs the model over the whole effective input series. Fails if the
/// parameters violate positivity or the ordering constraints.
pub fn simulate(
    p: &PhysicalParams,
    meta: &CatchmentMeta,
    eff: &EffectiveInputSeries,
    init: &ModelState,
    record_components: bool,
) -> Result<DischargeSeries> {
    p.validate()?;
    meta.validate()?;
    let n = eff.len();
    let mut total = Vec::with_capacity(n);
    let mut comps = record_components.then(ComponentTraces::default);
    let mut state = *init;
    for source in &eff.source {
        let (next, fx) = step(&state, source, p, meta);
        total.push(fx.spring());
        if let Some(c) = comps.as_mut() {
            c.q_hyd.push(fx.q_hyd);
            c.q_is.push(fx.q_is);
            c.q_sec.push(fx.q_sec);
            c.q_b.push(fx.q_b);
            c.levels.push(state.levels);
            c.baseflow_level.push(state.baseflow_level);
        }
        state = next;
    }
    Ok(DischargeSeries {
        dates: eff.dates.clone(),
        total,
        components: comps,
    })
}

/// Nash-Sutcliffe efficiency of `sim` against `obs`.
pub fn nse(sim: &[f64], obs: &[f64]) -> Result<f64> {
    if sim.len() != obs.len() || obs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ or are empty: {} vs {}",
            sim.len(),
            obs.len()
        )));
    }
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let var: f64 = obs.iter().map(|o| (o - mean).powi(2)).sum();
    if var == 0.0 {
        return Err(Error::UndefinedScore("observations are constant".into()));
    }
    let sse: f64 = sim.iter().zip(obs).map(|(s, o)| (s - o).powi(2)).sum();
    Ok(1.0 - sse / var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{to_physical, CalibrationVector, PriorSpec};

    fn hp() -> HydrotopeParams {
        HydrotopeParams {
            k_hyd: 90.0,
            e_min: 20.0,
            e_max: 40.0,
            alpha: 1.2,
            k_is: 0.05,
            k_sec: 0.1,
            e_sec: 50.0,
        }
    }

    fn meta() -> CatchmentMeta {
        CatchmentMeta::synthetic_default()
    }

    #[test]
    fn quickflow_edge_values() {
        let (p, m) = (hp(), meta());
        assert_eq!(quickflow(55.0, false, &p, &m, 0).unwrap(), 0.0);
        assert_eq!(quickflow(p.e_min, true, &p, &m, 0).unwrap(), 0.0);
        for alpha in [0.2, 1.0, 1.6] {
            let p = HydrotopeParams { alpha, ..p };
            let q = quickflow(p.e_max, true, &p, &m, 1).unwrap();
            assert_eq!(q, p.k_hyd / m.l_hyd[1] * m.areas[1]);
        }
        let bad = HydrotopeParams { e_max: 20.0, ..p };
        assert!(matches!(quickflow(30.0, true, &bad, &m, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn linear_discharge_values() {
        let mut m = meta();
        m.areas[0] = 1e6;
        let p = hp();
        assert_eq!(linear_discharges(0.0, &p, &m, 0), (0.0, 0.0));
        assert_eq!(linear_discharges(p.e_sec, &p, &m, 0).1, 0.0);
        // 0.05 * 40 mm * 1e6 m² = 2e6 mm·m²/d = 2e6 l/d = 2000 m³/d
        let (q_is, _) = linear_discharges(40.0, &p, &m, 0);
        assert!((q_is - 2000.0).abs() < 1e-9);
        let mut last = -1.0;
        for e in 0..200 {
            let (q, _) = linear_discharges(e as f64, &p, &m, 0);
            assert!(q > last);
            last = q;
        }
    }

    #[test]
    fn indicator_hysteresis_table() {
        let p = hp();
        assert!(update_indicator(false, p.e_max, &p));
        assert!(!update_indicator(true, p.e_min, &p));
        assert!(!update_indicator(false, 30.0, &p));
        assert!(update_indicator(true, 30.0, &p));
    }

    #[test]
    fn dry_state_is_a_fixed_point() {
        let p = to_physical(&CalibrationVector::center(), &PriorSpec::kerschbaum()).unwrap();
        let (next, fx) = step(&ModelState::empty(), &[0.0; 3], &p, &meta());
        assert_eq!(next, ModelState::empty());
        assert_eq!(fx, Fluxes::default());
    }

    #[test]
    fn recharge_only_bucket_converges_to_source_over_k_is() {
        let mut p = to_physical(&CalibrationVector::center(), &PriorSpec::kerschbaum()).unwrap();
        for h in &mut p.hydrotopes {
            h.k_sec = 0.0;
            h.e_min = 1e6;
            h.e_max = 2e6;
            h.k_is = 0.05;
        }
        let mut s = ModelState::empty();
        for _ in 0..2000 {
            s = step(&s, &[5.0; 3], &p, &meta()).0;
        }
        for e in s.levels {
            assert!((e - 5.0 / 0.05).abs() < 1e-9, "{e}");
        }
        // baseflow equilibrium: sum Q_is = Q_b
        let m = meta();
        let recharge: f64 = (0..3).map(|i| 0.05 * 100.0 * m.areas[i]).sum();
        let eb = recharge / (m.k_b * m.total_area);
        assert!((s.baseflow_level - eb).abs() / eb < 1e-6);
    }

    #[test]
    fn nse_identities() {
        let obs: Vec<f64> = (0..50).map(|i| 10.0 + (i as f64 * 0.3).sin()).collect();
        assert_eq!(nse(&obs, &obs).unwrap(), 1.0);
        let mean = obs.iter().sum::<f64>() / 50.0;
        assert!(nse(&vec![mean; 50], &obs).unwrap().abs() < 1e-12);
        let c = 0.25;
        let shifted: Vec<f64> = obs.iter().map(|o| o + c).collect();
        let var: f64 = obs.iter().map(|o| (o - mean).powi(2)).sum();
        let expect = 1.0 - 50.0 * c * c / var;
        assert!((nse(&shifted, &obs).unwrap() - expect).abs() < 1e-12);
        assert!(matches!(nse(&obs, &vec![1.0; 50]), Err(Error::UndefinedScore(_))));
    }

    #[test]
    fn catchment_file_requires_every_key() {
        let m = meta();
        let back = CatchmentMeta::parse(&m.to_text(), Path::new("c.txt")).unwrap();
        assert_eq!(back, m);
        let partial: String = m.to_text().lines().filter(|l| !l.starts_with("k_b")).map(|l| format!("{l}\n")).collect();
        let err = CatchmentMeta::parse(&partial, Path::new("c.txt")).unwrap_err();
        assert!(err.to_string().contains("k_b"));
    }
}
