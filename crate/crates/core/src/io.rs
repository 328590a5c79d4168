//! Small CSV and key-value helpers shared by the file formats.

use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub(crate) struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

pub(crate) struct Table {
    pub rows: Vec<Row>,
}

impl Row {
    pub fn float(&self, path: &Path, col: usize) -> Result<f64> {
        let raw = self.fields[col].trim();
        raw.parse::<f64>()
            .map_err(|_| Error::parse(path, self.line, format!("column {}: `{raw}` is not a number", col + 1)))
    }

    pub fn date(&self, path: &Path, col: usize) -> Result<NaiveDate> {
        let raw = self.fields[col].trim();
        NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .map_err(|_| Error::parse(path, self.line, format!("`{raw}` is not an ISO-8601 date")))
    }
}

/// Reads a CSV file whose header must contain `required` (other columns are
/// kept after them). Columns are reordered so `required[i]` sits at index `i`.
pub(crate) fn read_table(path: &Path, required: &[&str]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut order = Vec::with_capacity(header.len());
    for name in required {
        match header.iter().position(|h| h == name) {
            Some(i) => order.push(i),
            None => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("missing column `{name}` (header: {})", header.join(",")),
                ))
            }
        }
    }
    for i in 0..header.len() {
        if !order.contains(&i) {
            order.push(i);
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        rows.push(Row {
            line,
            fields: order.iter().map(|&i| rec[i].to_string()).collect(),
        });
    }
    Ok(Table { rows })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub(crate) fn key_values(text: &str, origin: &Path) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| Error::parse(origin, i + 1, format!("expected `key = value`, got `{line}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

pub(crate) fn write_string(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Shortest round-trip decimal form of a float.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
