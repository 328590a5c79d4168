//! End-to-end orchestration behind the command-line tool: configuration,
//! the five commands, synthetic twin data and run bookkeeping.

pub mod commands;
pub mod config;
pub mod ledger;
pub mod synthetic;

pub use commands::{
    cmd_invert, cmd_pushforward, cmd_simulate, cmd_subspace, cmd_synthetic, run_subspace, Inputs, InvertReport,
    SimulateReport, SubspaceArtifacts,
};
pub use config::{derive_seed, PipelineConfig};
pub use ledger::RunLedger;
pub use synthetic::{generate_twin, synthetic_forcing, SyntheticTwin};
