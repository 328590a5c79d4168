//! Daily forcing series and the snow/interception/evapotranspiration
//! preprocessing that turns them into per-hydrotope effective input.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};
use crate::N_HYDROTOPES;

/// Raw daily model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSeries {
    dates: Vec<NaiveDate>,
    precip: Vec<f64>,
    temp: Vec<f64>,
}

impl ForcingSeries {
    pub fn new(dates: Vec<NaiveDate>, precip: Vec<f64>, temp: Vec<f64>) -> Result<Self> {
        if dates.len() != precip.len() || dates.len() != temp.len() {
            return Err(Error::InvalidInput(format!(
                "column lengths differ: {} dates, {} precipitation, {} temperature",
                dates.len(),
                precip.len(),
                temp.len()
            )));
        }
        check_daily(&dates)?;
        if let Some((i, p)) = precip
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "precipitation on {} is {p}; must be finite and >= 0",
                dates[i]
            )));
        }
        if let Some(i) = temp.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "temperature on {} is not finite",
                dates[i]
            )));
        }
        Ok(ForcingSeries {
            dates,
            precip,
            temp,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn precip(&self) -> &[f64] {
        &self.precip
    }

    pub fn temp(&self) -> &[f64] {
        &self.temp
    }

    /// Reads `date,precip_mm,temp_c`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let table = crate::io::read_table(path, &["date", "precip_mm", "temp_c"])?;
        let mut dates = Vec::with_capacity(table.rows.len());
        let mut precip = Vec::with_capacity(table.rows.len());
        let mut temp = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            dates.push(row.date(path, 0)?);
            precip.push(row.float(path, 1)?);
            temp.push(row.float(path, 2)?);
        }
        ForcingSeries::new(dates, precip, temp)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("date,precip_mm,temp_c\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.dates[i], self.precip[i], self.temp[i]
            ));
        }
        crate::io::write_string(path, &out)
    }
}

fn check_daily(dates: &[NaiveDate]) -> Result<()> {
    for w in dates.windows(2) {
        let gap = (w[1] - w[0]).num_days();
        if gap != 1 {
            return Err(Error::InvalidInput(format!(
                "dates must be consecutive days: {} follows {} ({gap} day gap)",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PetMethod {
    None,
    #[default]
    Thornthwaite,
}

impl FromStr for PetMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "off" => Ok(PetMethod::None),
            "thornthwaite" => Ok(PetMethod::Thornthwaite),
            other => Err(Error::Config(format!("unknown pet_method `{other}`"))),
        }
    }
}

impl fmt::Display for PetMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PetMethod::None => "none",
            PetMethod::Thornthwaite => "thornthwaite",
        })
    }
}

/// Forcing preprocessing settings, read from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingConfig {
    /// Degree-day melt coefficient, mm °C⁻¹ d⁻¹.
    pub c_m: f64,
    /// Rain/snow and melt threshold temperature, °C.
    pub t0: f64,
    /// Daily canopy interception capacity, mm/d.
    pub interception_mm: f64,
    pub pet_method: PetMethod,
    /// Days at the start of the series excluded from misfit evaluation.
    pub warmup_days: usize,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig {
            c_m: 3.0,
            t0: 0.0,
            interception_mm: 1.0,
            pet_method: PetMethod::Thornthwaite,
            warmup_days: 90,
        }
    }
}

impl ForcingConfig {
    pub const KEYS: [&'static str; 5] = ["c_m", "t0", "interception_mm", "pet_method", "warmup_days"];

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = ForcingConfig::default();
        for (k, v, line) in crate::io::key_values(text, origin)? {
            let bad = |e: String| Error::parse(origin, line, format!("key `{k}`: {e}"));
            match k.as_str() {
                "c_m" => cfg.c_m = v.parse().map_err(|e| bad(format!("{e}")))?,
                "t0" => cfg.t0 = v.parse().map_err(|e| bad(format!("{e}")))?,
                "interception_mm" => {
                    cfg.interception_mm = v.parse().map_err(|e| bad(format!("{e}")))?
                }
                "pet_method" => cfg.pet_method = v.parse().map_err(|e: Error| bad(e.to_string()))?,
                "warmup_days" => cfg.warmup_days = v.parse().map_err(|e| bad(format!("{e}")))?,
                other => {
                    return Err(Error::parse(
                        origin,
                        line,
                        format!("unknown key `{other}` (expected one of {:?})", Self::KEYS),
                    ))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        format!(
            "c_m = {}\nt0 = {}\ninterception_mm = {}\npet_method = {}\nwarmup_days = {}\n",
            self.c_m, self.t0, self.interception_mm, self.pet_method, self.warmup_days
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_m >= 0.0 && self.c_m.is_finite()) {
            return Err(Error::Config(format!("c_m must be >= 0, got {}", self.c_m)));
        }
        if !(self.interception_mm >= 0.0 && self.interception_mm.is_finite()) {
            return Err(Error::Config(format!(
                "interception_mm must be >= 0, got {}",
                self.interception_mm
            )));
        }
        if !self.t0.is_finite() {
            return Err(Error::Config("t0 must be finite".into()));
        }
        Ok(())
    }
}

/// Per-hydrotope effective input `S_i` (mm/d) with the snow store trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveInputSeries {
    pub dates: Vec<NaiveDate>,
    pub source: Vec<[f64; N_HYDROTOPES]>,
    /// Snow water equivalent at the end of each day, mm.
    pub snow_store: Vec<f64>,
    pub melt: Vec<f64>,
    pub rain: Vec<f64>,
}

impl EffectiveInputSeries {
    /// Wraps a precomputed effective input, bypassing preprocessing.
    pub fn from_sources(dates: Vec<NaiveDate>, source: Vec<[f64; N_HYDROTOPES]>) -> Result<Self> {
        if dates.len() != source.len() {
            return Err(Error::InvalidInput(format!(
                "{} dates but {} effective-input rows",
                dates.len(),
                source.len()
            )));
        }
        check_daily(&dates)?;
        if source.iter().flatten().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidInput(
                "effective input must be finite and >= 0".into(),
            ));
        }
        let n = dates.len();
        Ok(EffectiveInputSeries {
            dates,
            source,
            snow_store: vec![0.0; n],
            melt: vec![0.0; n],
            rain: vec![0.0; n],
        })
    }

    pub fn zeros(dates: Vec<NaiveDate>) -> Result<Self> {
        let n = dates.len();
        Self::from_sources(dates, vec![[0.0; N_HYDROTOPES]; n])
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Reads `date,s1_mm,s2_mm,s3_mm`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let table = crate::io::read_table(path, &["date", "s1_mm", "s2_mm", "s3_mm"])?;
        let mut dates = Vec::with_capacity(table.rows.len());
        let mut source = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            dates.push(row.date(path, 0)?);
            source.push([row.float(path, 1)?, row.float(path, 2)?, row.float(path, 3)?]);
        }
        Self::from_sources(dates, source)
    }
}

/// Thornthwaite potential evapotranspiration, spread uniformly over the
/// days of each month. Returns mm/d per day of the series.
pub fn thornthwaite_daily_pet(dates: &[NaiveDate], temp: &[f64]) -> Vec<f64> {
    // mean temperature per (year, month) present in the series
    let mut monthly: BTreeMap<(i32, u32), (f64, usize)> = BTreeMap::new();
    for (d, t) in dates.iter().zip(temp) {
        let e = monthly.entry((d.year(), d.month())).or_insert((0.0, 0));
        e.0 += t;
        e.1 += 1;
    }
    let mut clim = [(0.0, 0usize); 12];
    for (&(_, m), &(sum, n)) in &monthly {
        let c = &mut clim[(m - 1) as usize];
        c.0 += sum / n as f64;
        c.1 += 1;
    }
    let heat_index: f64 = clim
        .iter()
        .filter(|c| c.1 > 0)
        .map(|c| c.0 / c.1 as f64)
        .filter(|t| *t > 0.0)
        .map(|t| (t / 5.0).powf(1.514))
        .sum();
    if heat_index <= 0.0 {
        return vec![0.0; dates.len()];
    }
    let a = 6.75e-7 * heat_index.powi(3) - 7.71e-5 * heat_index.powi(2)
        + 1.792e-2 * heat_index
        + 0.49239;
    dates
        .iter()
        .map(|d| {
            let (sum, n) = monthly[&(d.year(), d.month())];
            let t = sum / n as f64;
            if t <= 0.0 {
                return 0.0;
            }
            let month_pet = 16.0 * (10.0 * t / heat_index).powf(a);
            month_pet / days_in_month(d.year(), d.month()) as f64
        })
        .collect()
}

fn days_in_month(year: i32, month: u32) -> i64 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    (next - first).num_days()
}

/// Degree-day snow accumulation and melt, interception and PET, yielding
/// `S = rain - interception + melt - pet`, floored at zero.
pub fn preprocess_forcing(raw: &ForcingSeries, cfg: &ForcingConfig) -> Result<EffectiveInputSeries> {
    cfg.validate()?;
    let n = raw.len();
    let pet = match cfg.pet_method {
        PetMethod::None => vec![0.0; n],
        PetMethod::Thornthwaite => thornthwaite_daily_pet(&raw.dates, &raw.temp),
    };
    let mut snow = 0.0;
    let mut source = Vec::with_capacity(n);
    let mut snow_store = Vec::with_capacity(n);
    let mut melt_trace = Vec::with_capacity(n);
    let mut rain_trace = Vec::with_capacity(n);
    for i in 0..n {
        let (p, t) = (raw.precip[i], raw.temp[i]);
        let rain = if t < cfg.t0 {
            snow += p;
            0.0
        } else {
            p
        };
        let melt = (cfg.c_m * (t - cfg.t0).max(0.0)).min(snow);
        snow -= melt;
        let intercepted = rain.min(cfg.interception_mm);
        let s = (rain - intercepted + melt - pet[i]).max(0.0);
        source.push([s; N_HYDROTOPES]);
        snow_store.push(snow);
        melt_trace.push(melt);
        rain_trace.push(rain);
    }
    Ok(EffectiveInputSeries {
        dates: raw.dates.clone(),
        source,
        snow_store,
        melt: melt_trace,
        rain: rain_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn days(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2006, 1, 1).unwrap();
        (0..n).map(|i| start + chrono::Days::new(i as u64)).collect()
    }

    fn bare(c_m: f64) -> ForcingConfig {
        ForcingConfig {
            c_m,
            t0: 0.0,
            interception_mm: 0.0,
            pet_method: PetMethod::None,
            warmup_days: 0,
        }
    }

    #[test]
    fn cold_spell_accumulates_snow_only() {
        let raw = ForcingSeries::new(days(20), vec![10.0; 20], vec![-5.0; 20]).unwrap();
        let eff = preprocess_forcing(&raw, &bare(3.0)).unwrap();
        assert!(eff.rain.iter().all(|r| *r == 0.0));
        assert!(eff.source.iter().flatten().all(|s| *s == 0.0));
        assert_eq!(*eff.snow_store.last().unwrap(), 200.0);
    }

    #[test]
    fn zero_melt_coefficient_never_melts() {
        let temp: Vec<f64> = (0..30).map(|i| -10.0 + i as f64).collect();
        let raw = ForcingSeries::new(days(30), vec![5.0; 30], temp).unwrap();
        let eff = preprocess_forcing(&raw, &bare(0.0)).unwrap();
        assert!(eff.melt.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn three_day_degree_day_recurrence() {
        let raw = ForcingSeries::new(days(3), vec![10.0, 0.0, 0.0], vec![-2.0, 2.0, 2.0]).unwrap();
        let eff = preprocess_forcing(&raw, &bare(2.0)).unwrap();
        assert_eq!(eff.melt, vec![0.0, 4.0, 4.0]);
        assert_eq!(eff.snow_store, vec![10.0, 6.0, 2.0]);
        let s: Vec<f64> = eff.source.iter().map(|s| s[0]).collect();
        assert_eq!(s, vec![0.0, 4.0, 4.0]);
    }

    #[test]
    fn snow_mass_is_conserved() {
        let n = 400;
        let temp: Vec<f64> = (0..n).map(|i| 8.0 * ((i as f64) / 20.0).sin()).collect();
        let precip: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64).collect();
        let raw = ForcingSeries::new(days(n), precip.clone(), temp.clone()).unwrap();
        let eff = preprocess_forcing(&raw, &bare(2.5)).unwrap();
        let snowfall: f64 = precip.iter().zip(&temp).filter(|(_, t)| **t < 0.0).map(|(p, _)| p).sum();
        let melt: f64 = eff.melt.iter().sum();
        assert!((snowfall - melt - eff.snow_store[n - 1]).abs() < 1e-9);
        assert!(eff.snow_store.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn interception_and_pet_reduce_input() {
        let n = 365;
        let temp: Vec<f64> = (0..n).map(|i| 10.0 - 10.0 * (2.0 * std::f64::consts::PI * i as f64 / 365.0).cos()).collect();
        let raw = ForcingSeries::new(days(n), vec![4.0; n], temp).unwrap();
        let plain = preprocess_forcing(&raw, &bare(2.0)).unwrap();
        let cfg = ForcingConfig { interception_mm: 1.0, pet_method: PetMethod::Thornthwaite, ..bare(2.0) };
        let full = preprocess_forcing(&raw, &cfg).unwrap();
        let total = |e: &EffectiveInputSeries| e.source.iter().map(|s| s[0]).sum::<f64>();
        assert!(total(&full) < total(&plain) - 365.0 + 1e-9);
        assert!(full.source.iter().flatten().all(|s| *s >= 0.0));
    }

    #[test]
    fn thornthwaite_summer_exceeds_winter() {
        let n = 365;
        let dates = days(n);
        let temp: Vec<f64> = (0..n).map(|i| 8.0 - 10.0 * (2.0 * std::f64::consts::PI * i as f64 / 365.0).cos()).collect();
        let pet = thornthwaite_daily_pet(&dates, &temp);
        assert_eq!(pet[0], 0.0);
        assert!(pet[190] > 2.0 && pet[190] < 6.0, "July PET {}", pet[190]);
    }

    #[test]
    fn rejects_gaps_and_negative_precip() {
        let mut d = days(3);
        d[2] = d[2] + chrono::Days::new(1);
        assert!(ForcingSeries::new(d, vec![0.0; 3], vec![0.0; 3]).is_err());
        assert!(ForcingSeries::new(days(3), vec![0.0, -1.0, 0.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn config_roundtrip_and_unknown_key() {
        let cfg = ForcingConfig { c_m: 2.5, warmup_days: 30, ..Default::default() };
        let back = ForcingConfig::parse(&cfg.to_text(), Path::new("cfg")).unwrap();
        assert_eq!(back, cfg);
        let err = ForcingConfig::parse("c_m = 1\nfoo = 2\n", Path::new("cfg")).unwrap_err();
        assert!(err.to_string().contains("cfg:2"), "{err}");
    }
}
