//! Experiment harness around the agora engine: run a scenario config into a
//! self-contained run directory, replicate an experiment pack across derived
//! seeds, replay recorded transcripts, and report pooled results with the
//! declared statistics.

pub mod commands;
pub mod pack;
pub mod report;
pub mod rundir;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use commands::{
    cmd_replay, cmd_replicate, cmd_report, cmd_run, ReplicateOptions, ReportOptions, RunOptions,
};
pub use pack::{ExperimentPack, PackError};
pub use report::Report;

pub const PACK_FILE: &str = "pack.json";
pub const BATCH_FILE: &str = "batch.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error(transparent)]
    Engine(#[from] agora_core::engine::EngineError),
    #[error(transparent)]
    Backend(#[from] agora_core::cognition::BackendError),
    #[error(transparent)]
    Policy(#[from] agora_core::policies::PolicyError),
    #[error(transparent)]
    Pgg(#[from] agora_core::pgg::PggError),
    #[error(transparent)]
    Scenario(#[from] agora_core::scenarios::ScenarioError),
    #[error(transparent)]
    Extract(#[from] agora_core::extract::ExtractError),
    #[error(transparent)]
    Stats(#[from] agora_core::stats::StatsError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("nothing to report: {0}")]
    MissingExtraction(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    /// Stable machine-readable tag for the error record printed on failure.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Pack(_) => "pack",
            CliError::Engine(_) => "engine",
            CliError::Backend(_) => "backend",
            CliError::Policy(_) => "policy",
            CliError::Pgg(_) => "pgg",
            CliError::Scenario(_) => "scenario",
            CliError::Extract(_) => "extract",
            CliError::Stats(_) => "stats",
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "json",
            CliError::MissingExtraction(_) => "missing_extraction",
            CliError::Config(_) => "config",
        }
    }

    /// The JSON error record written to stderr before a nonzero exit.
    pub fn record(&self) -> serde_json::Value {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string() }
        })
    }
}

/// One run's row in `batch.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRun {
    pub cell: String,
    pub replication: u32,
    pub seed: u64,
    pub dir: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The batch index `replicate` writes next to its run directories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSummary {
    pub schema_version: String,
    pub pack_id: String,
    pub runs: Vec<BatchRun>,
}

impl BatchSummary {
    pub fn failures(&self) -> Vec<&BatchRun> {
        self.runs.iter().filter(|r| !r.ok).collect()
    }
}
