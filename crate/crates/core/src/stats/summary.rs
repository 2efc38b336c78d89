//! Experiment summaries: descriptive rows per group, human baselines side by
//! side, and the pack-designated significance tests.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{one_sample_t, welch_two_sample, Sample, StatsError, TTestResult, Tail};

/// How a baseline constant may be compared against simulated results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// An absolute human mean, comparable to a group mean.
    AbsoluteMean,
    /// Only the between-group difference is meaningful.
    DifferenceOnly,
    /// A simulated-agent reference value, not human truth.
    AgentResult,
}

/// A constant from the human-experiment literature (or a tagged agent-side
/// reference), shipped in a versioned data table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HumanBaseline {
    pub treatment: String,
    pub value_percent: f64,
    pub kind: BaselineKind,
    #[serde(default)]
    pub note: String,
}

impl HumanBaseline {
    /// The baseline value as a fraction in [0, 1].
    pub fn fraction(&self) -> f64 {
        self.value_percent / 100.0
    }

    /// Rendering used in report tables.
    pub fn display(&self) -> String {
        match self.kind {
            BaselineKind::AbsoluteMean => format!("{}%", trim_float(self.value_percent)),
            BaselineKind::DifferenceOnly => {
                format!("+{}% (difference only)", trim_float(self.value_percent))
            }
            BaselineKind::AgentResult => {
                format!("{}% (agent result)", trim_float(self.value_percent))
            }
        }
    }
}

fn trim_float(v: f64) -> String {
    let s = format!("{v:.1}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

#[derive(Deserialize)]
struct BaselineTable {
    #[allow(dead_code)]
    version: String,
    baselines: Vec<HumanBaseline>,
}

/// The shipped baseline table.
pub fn human_baselines() -> &'static [HumanBaseline] {
    static TABLE: OnceLock<Vec<HumanBaseline>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let table: BaselineTable = serde_json::from_str(include_str!("../../data/baselines.json"))
            .expect("shipped baseline table parses");
        table.baselines
    })
}

/// Which test a pack-designated comparison runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TestKind {
    Welch {
        a: String,
        b: String,
    },
    OneSample {
        group: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        baseline: Option<String>,
    },
}

/// A single comparison the report must run, as declared by the pack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonSpec {
    pub label: String,
    #[serde(flatten)]
    pub test: TestKind,
    pub tail: Tail,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupRow {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// Rendered human/baseline column, when a baseline shares the group label.
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub result: TTestResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub groups: Vec<GroupRow>,
    pub comparisons: Vec<ComparisonRow>,
}

/// Builds the summary table: one row per group (with any baseline whose
/// treatment matches the group label shown side by side) plus one row per
/// designated comparison.
pub fn summarize_experiment(
    groups: &BTreeMap<String, Sample>,
    baselines: &[HumanBaseline],
    comparisons: &[ComparisonSpec],
) -> Result<ExperimentSummary, StatsError> {
    let mut group_rows = Vec::new();
    for (label, sample) in groups {
        let baseline = baselines
            .iter()
            .find(|b| b.treatment == *label)
            .map(HumanBaseline::display);
        let sd = if sample.n() >= 2 { sample.sd() } else { 0.0 };
        group_rows.push(GroupRow {
            label: label.clone(),
            n: sample.n(),
            mean: if sample.n() > 0 { sample.mean() } else { 0.0 },
            sd,
            baseline,
        });
    }

    let lookup = |label: &str| -> Result<&Sample, StatsError> {
        groups
            .get(label)
            .ok_or_else(|| StatsError::UnknownGroup(label.to_string()))
    };
    let mut comparison_rows = Vec::new();
    for spec in comparisons {
        let result = match &spec.test {
            TestKind::Welch { a, b } => welch_two_sample(lookup(a)?, lookup(b)?, spec.tail)?,
            TestKind::OneSample {
                group,
                mu,
                baseline,
            } => {
                let mu = match (mu, baseline) {
                    (Some(mu), None) => *mu,
                    (None, Some(treatment)) => baselines
                        .iter()
                        .find(|b| b.treatment == *treatment)
                        .ok_or_else(|| StatsError::UnknownBaseline(treatment.clone()))?
                        .fraction(),
                    _ => return Err(StatsError::MalformedComparison(spec.label.clone())),
                };
                one_sample_t(lookup(group)?, mu, spec.tail)?
            }
        };
        comparison_rows.push(ComparisonRow {
            label: spec.label.clone(),
            result,
        });
    }
    Ok(ExperimentSummary {
        groups: group_rows,
        comparisons: comparison_rows,
    })
}
