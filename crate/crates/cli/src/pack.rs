//! Experiment packs: a declarative batch of scenario cells, replication
//! counts, seed derivation, backend selection, and the comparisons the
//! report must run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use agora_core::money::Cents;
use agora_core::pgg::GameSpec;
use agora_core::scenarios::{CartSpec, ClassroomSpec};
use agora_core::stats::{human_baselines, ComparisonSpec, TestKind};

pub const PACK_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum PackError {
    #[error("cannot read pack {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("pack is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pack schema version {got:?} is not supported (expected {expected:?})")]
    SchemaVersion { got: String, expected: String },
    #[error("pack has no cells")]
    NoCells,
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("cell label {0:?} appears more than once")]
    DuplicateCell(String),
    #[error("cell label {0:?} must match [A-Za-z0-9][A-Za-z0-9_-]*")]
    BadLabel(String),
    #[error("cell {label:?} has an invalid {scenario} spec: {message}")]
    BadCell {
        label: String,
        scenario: &'static str,
        message: String,
    },
    #[error("seed entry {index} ({value}) is not a valid u64 seed")]
    BadSeed { index: usize, value: String },
    #[error("seed list has {got} entries but cells x replications = {expected}")]
    SeedCount { expected: usize, got: usize },
    #[error("comparison {comparison:?} references unknown group {group:?}")]
    UnknownGroup { comparison: String, group: String },
    #[error("comparison {comparison:?} references unknown baseline {baseline:?}")]
    UnknownBaseline {
        comparison: String,
        baseline: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Pgg,
    Classroom,
    Cart,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Pgg => "pgg",
            ScenarioKind::Classroom => "classroom",
            ScenarioKind::Cart => "cart",
        }
    }

    /// Default scripted policy for worlds of this kind.
    pub fn default_policy(self) -> &'static str {
        match self {
            ScenarioKind::Pgg => "pgg",
            ScenarioKind::Classroom => "classroom",
            ScenarioKind::Cart => "cart",
        }
    }
}

/// One experimental condition: a label plus the scenario spec it runs.
/// The spec stays untyped JSON here and is parsed per scenario kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub label: String,
    pub spec: serde_json::Value,
}

/// Either one master seed that derives the whole batch, or an explicit list
/// of one seed per (cell, replication) in cell-major order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum SeedSource {
    Master { master: u64 },
    List { list: Vec<serde_json::Value> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BackendChoice {
    /// Live chat-completion endpoint; needs `AGORA_API_KEY`.
    Http {
        #[serde(default = "default_model")]
        model: String,
    },
    /// Replays per-run transcripts recorded under a prior batch root.
    Replay { from: PathBuf },
    /// Deterministic scripted policy, seeded per run.
    Scripted {
        policy: String,
        #[serde(default)]
        params: serde_json::Value,
    },
}

fn default_model() -> String {
    "gpt-4".to_string()
}

/// How report observations are grouped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// One group per cell.
    #[default]
    Cell,
    /// One group per (cell, round); labels gain an `-r{round}` suffix.
    CellRound,
    /// One group per (cell, initial endowment). Cells whose players share a
    /// single endowment keep the plain cell label; mixed cells gain a
    /// `-{dollars}` suffix.
    CellEndowment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPack {
    pub schema_version: String,
    pub pack_id: String,
    pub scenario: ScenarioKind,
    pub cells: Vec<Cell>,
    pub replications: u32,
    pub seeds: SeedSource,
    pub backend: BackendChoice,
    #[serde(default)]
    pub grouping: Grouping,
    #[serde(default)]
    pub comparisons: Vec<ComparisonSpec>,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The first `count` outputs of a splitmix64 stream started at `master`.
/// Run (cell c, replication r) with R replications per cell takes entry
/// `c * R + r`.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut state = master;
    (0..count).map(|_| splitmix64(&mut state)).collect()
}

impl ExperimentPack {
    pub fn from_json(text: &str) -> Result<ExperimentPack, PackError> {
        let pack: ExperimentPack = serde_json::from_str(text)?;
        pack.validate()?;
        Ok(pack)
    }

    pub fn from_path(path: &Path) -> Result<ExperimentPack, PackError> {
        let text = std::fs::read_to_string(path).map_err(|source| PackError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ExperimentPack::from_json(&text)
    }

    pub fn runs(&self) -> usize {
        self.cells.len() * self.replications as usize
    }

    /// One seed per (cell, replication), cell-major.
    pub fn resolve_seeds(&self) -> Result<Vec<u64>, PackError> {
        let expected = self.runs();
        match &self.seeds {
            SeedSource::Master { master } => Ok(derive_seeds(*master, expected)),
            SeedSource::List { list } => {
                if list.len() != expected {
                    return Err(PackError::SeedCount {
                        expected,
                        got: list.len(),
                    });
                }
                list.iter()
                    .enumerate()
                    .map(|(index, value)| {
                        value.as_u64().ok_or_else(|| PackError::BadSeed {
                            index,
                            value: value.to_string(),
                        })
                    })
                    .collect()
            }
        }
    }

    /// Parses a cell's spec according to the pack's scenario kind, surfacing
    /// parse and validation failures as pack errors naming the cell.
    pub fn parse_cell(&self, cell: &Cell) -> Result<ParsedSpec, PackError> {
        let bad = |message: String| PackError::BadCell {
            label: cell.label.clone(),
            scenario: self.scenario.as_str(),
            message,
        };
        match self.scenario {
            ScenarioKind::Pgg => {
                let spec: GameSpec =
                    serde_json::from_value(cell.spec.clone()).map_err(|e| bad(e.to_string()))?;
                spec.validate().map_err(|e| bad(e.to_string()))?;
                Ok(ParsedSpec::Pgg(spec))
            }
            ScenarioKind::Classroom => {
                let spec: ClassroomSpec =
                    serde_json::from_value(cell.spec.clone()).map_err(|e| bad(e.to_string()))?;
                spec.validate().map_err(|e| bad(e.to_string()))?;
                Ok(ParsedSpec::Classroom(spec))
            }
            ScenarioKind::Cart => {
                let spec: CartSpec =
                    serde_json::from_value(cell.spec.clone()).map_err(|e| bad(e.to_string()))?;
                Ok(ParsedSpec::Cart(spec))
            }
        }
    }

    /// Every group label the report will produce under the pack's grouping.
    pub fn group_labels(&self) -> Result<BTreeSet<String>, PackError> {
        let mut labels = BTreeSet::new();
        for cell in &self.cells {
            match (self.grouping, self.parse_cell(cell)?) {
                (Grouping::Cell, _) => {
                    labels.insert(cell.label.clone());
                }
                (Grouping::CellRound, ParsedSpec::Pgg(spec)) => {
                    for round in 1..=spec.rounds {
                        labels.insert(format!("{}-r{round}", cell.label));
                    }
                }
                (Grouping::CellEndowment, ParsedSpec::Pgg(spec)) => {
                    let endowments: BTreeSet<Cents> =
                        spec.players.iter().map(|p| p.endowment).collect();
                    if endowments.len() <= 1 {
                        labels.insert(cell.label.clone());
                    } else {
                        for e in endowments {
                            labels.insert(endowment_group_label(&cell.label, e));
                        }
                    }
                }
                (Grouping::CellRound | Grouping::CellEndowment, _) => {
                    labels.insert(cell.label.clone());
                }
            }
        }
        Ok(labels)
    }

    pub fn validate(&self) -> Result<(), PackError> {
        if self.schema_version != PACK_SCHEMA_VERSION {
            return Err(PackError::SchemaVersion {
                got: self.schema_version.clone(),
                expected: PACK_SCHEMA_VERSION.to_string(),
            });
        }
        if self.cells.is_empty() {
            return Err(PackError::NoCells);
        }
        if self.replications < 1 {
            return Err(PackError::NoReplications);
        }
        let label_ok = |label: &str| {
            let mut chars = label.chars();
            chars.next().map(|c| c.is_ascii_alphanumeric()) == Some(true)
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        };
        let mut seen = BTreeSet::new();
        for cell in &self.cells {
            if !label_ok(&cell.label) {
                return Err(PackError::BadLabel(cell.label.clone()));
            }
            if !seen.insert(&cell.label) {
                return Err(PackError::DuplicateCell(cell.label.clone()));
            }
            self.parse_cell(cell)?;
        }
        self.resolve_seeds()?;

        let groups = self.group_labels()?;
        let known_baselines: BTreeSet<&str> = human_baselines()
            .iter()
            .map(|b| b.treatment.as_str())
            .collect();
        for comparison in &self.comparisons {
            let check_group = |group: &String| {
                if groups.contains(group) {
                    Ok(())
                } else {
                    Err(PackError::UnknownGroup {
                        comparison: comparison.label.clone(),
                        group: group.clone(),
                    })
                }
            };
            match &comparison.test {
                TestKind::Welch { a, b } => {
                    check_group(a)?;
                    check_group(b)?;
                }
                TestKind::OneSample {
                    group, baseline, ..
                } => {
                    check_group(group)?;
                    if let Some(baseline) = baseline {
                        if !known_baselines.contains(baseline.as_str()) {
                            return Err(PackError::UnknownBaseline {
                                comparison: comparison.label.clone(),
                                baseline: baseline.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A cell spec parsed into its concrete scenario type.
#[derive(Debug, Clone)]
pub enum ParsedSpec {
    Pgg(GameSpec),
    Classroom(ClassroomSpec),
    Cart(CartSpec),
}

pub fn endowment_group_label(cell: &str, endowment: Cents) -> String {
    format!("{cell}-{}", endowment.whole_dollars())
}
