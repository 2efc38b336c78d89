//! Welch two-sample and one-sample t-tests.

use serde::{Deserialize, Serialize};

use super::{t_cdf, Sample, StatsError, Tail};

/// Outcome of a t-test, carrying the descriptive stats of its inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub tail: Tail,
    pub p: f64,
    pub mean_a: f64,
    pub sd_a: f64,
    pub n_a: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_b: Option<usize>,
}

/// Welch's unequal-variance two-sample t-test with the
/// Welch-Satterthwaite degrees of freedom.
pub fn welch_two_sample(a: &Sample, b: &Sample, tail: Tail) -> Result<TTestResult, StatsError> {
    for s in [a, b] {
        if s.n() < 2 {
            return Err(StatsError::TooFewObservations {
                label: s.label.clone(),
                n: s.n(),
            });
        }
    }
    let (va, vb) = (a.variance(), b.variance());
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::DegenerateVariance {
            label: format!("{} and {}", a.label, b.label),
        });
    }
    let (na, nb) = (a.n() as f64, b.n() as f64);
    let sea = va / na;
    let seb = vb / nb;
    let se2 = sea + seb;
    let t = (a.mean() - b.mean()) / se2.sqrt();
    let df = se2 * se2 / (sea * sea / (na - 1.0) + seb * seb / (nb - 1.0));
    Ok(TTestResult {
        t,
        df,
        tail,
        p: p_value(t, df, tail)?,
        mean_a: a.mean(),
        sd_a: a.sd(),
        n_a: a.n(),
        mean_b: Some(b.mean()),
        sd_b: Some(b.sd()),
        n_b: Some(b.n()),
    })
}

/// One-sample t-test of `a` against the fixed mean `mu`.
pub fn one_sample_t(a: &Sample, mu: f64, tail: Tail) -> Result<TTestResult, StatsError> {
    if a.n() < 2 {
        return Err(StatsError::TooFewObservations {
            label: a.label.clone(),
            n: a.n(),
        });
    }
    let v = a.variance();
    if v == 0.0 {
        return Err(StatsError::DegenerateVariance {
            label: a.label.clone(),
        });
    }
    let n = a.n() as f64;
    let t = (a.mean() - mu) / (v / n).sqrt();
    let df = n - 1.0;
    Ok(TTestResult {
        t,
        df,
        tail,
        p: p_value(t, df, tail)?,
        mean_a: a.mean(),
        sd_a: a.sd(),
        n_a: a.n(),
        mean_b: None,
        sd_b: None,
        n_b: None,
    })
}

fn p_value(t: f64, df: f64, tail: Tail) -> Result<f64, StatsError> {
    Ok(match tail {
        Tail::Two => 2.0 * (1.0 - t_cdf(t.abs(), df)?),
        Tail::OneGreater => 1.0 - t_cdf(t, df)?,
        Tail::OneLess => t_cdf(t, df)?,
    })
}
