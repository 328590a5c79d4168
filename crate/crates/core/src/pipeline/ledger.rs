use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One pipeline stage: its forward-model evaluations and wall time.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageRecord {
    pub name: String,
    pub evaluations: u64,
    /// Closed-form count the stage should have used, when known.
    pub expected_evaluations: Option<u64>,
    pub seconds: f64,
}

/// Bookkeeping of a run: evaluation counts, timings, seeds and artifact
/// checksums.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunLedger {
    pub command: String,
    pub stages: Vec<StageRecord>,
    pub seeds: BTreeMap<String, u64>,
    pub checksums: BTreeMap<String, String>,
}

/// Hex SHA-256 of a file.
pub fn file_checksum(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl RunLedger {
    pub fn new(command: &str) -> Self {
        RunLedger {
            command: command.to_string(),
            ..Default::default()
        }
    }

    pub fn record(&mut self, name: &str, evaluations: u64, expected: Option<u64>, started: Instant) {
        if let Some(e) = expected {
            if e != evaluations {
                log::warn!("stage {name}: {evaluations} evaluations, expected {e}");
            }
        }
        let seconds = started.elapsed().as_secs_f64();
        log::info!("{name}: {evaluations} model runs in {seconds:.1} s");
        self.stages.push(StageRecord {
            name: name.to_string(),
            evaluations,
            expected_evaluations: expected,
            seconds,
        });
    }

    pub fn seed(&mut self, label: &str, value: u64) {
        self.seeds.insert(label.to_string(), value);
    }

    pub fn evaluations(&self, stage: &str) -> Option<u64> {
        self.stages.iter().find(|s| s.name == stage).map(|s| s.evaluations)
    }

    pub fn total_evaluations(&self) -> u64 {
        self.stages.iter().map(|s| s.evaluations).sum()
    }

    /// Records the checksum of an artifact under its file name.
    pub fn artifact(&mut self, path: &Path) -> Result<()> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.checksums.insert(name, file_checksum(path)?);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes") + "\n"
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_string(path, &self.to_json())
    }
}
