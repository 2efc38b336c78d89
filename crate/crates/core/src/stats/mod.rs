//! Statistical battery for experiment reports: Welch and one-sample t-tests,
//! the t-distribution CDF they need, and summary tables with human baselines.

mod summary;
mod tdist;
mod ttest;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use summary::{
    human_baselines, summarize_experiment, BaselineKind, ComparisonRow, ComparisonSpec,
    ExperimentSummary, GroupRow, HumanBaseline, TestKind,
};
pub use tdist::t_cdf;
pub use ttest::{one_sample_t, welch_two_sample, TTestResult};

/// A labeled list of observations (contribution fractions or money amounts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub label: String,
    pub values: Vec<f64>,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Sample {
        Sample {
            label: label.into(),
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample variance with the n-1 denominator.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
            / (self.values.len() as f64 - 1.0)
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// Which tail the reported p-value covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Two,
    /// H1: mean(a) > mean(b) (or mean > mu).
    OneGreater,
    /// H1: mean(a) < mean(b) (or mean < mu).
    OneLess,
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample {label:?} has {n} observations; the test needs at least 2")]
    TooFewObservations { label: String, n: usize },
    #[error("degenerate variance in {label}")]
    DegenerateVariance { label: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("comparison references unknown group {0:?}")]
    UnknownGroup(String),
    #[error("comparison references unknown baseline {0:?}")]
    UnknownBaseline(String),
    #[error("comparison {0:?} must name exactly one of mu or baseline")]
    MalformedComparison(String),
}
