//! Two-sample statistics for comparing event populations.

mod bootstrap;
mod compare;
mod contingency;
mod density;
mod effect;
mod normality;
mod rank;

pub use bootstrap::{bootstrap_median_ci, BootstrapConfig};
pub use compare::{
    compare_metrics, speed_matched_subsample, CompareOptions, ComparisonReport, MetricReport,
    NormalityScreen, SeverityShares, SpeedMatched, TestResult, COMPARED_METRICS,
};
pub use contingency::{bonferroni, chi_square_2x2, threshold_test, ThresholdTest};
pub use density::{ecdf, kde_1d, risk_space_kde, silverman_bandwidth, RiskGrid};
pub use effect::{cliffs_delta, cohens_d};
pub use normality::{shapiro_wilk, ShapiroWilk};
pub use rank::{mann_whitney_u, MannWhitney, PMethod, EXACT_LIMIT};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("expected count is zero in the contingency table")]
    ZeroExpected,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// One metric's values for one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleSet {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, StatsError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        Ok(Self {
            label: label.into(),
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

pub(crate) fn require(values: &[f64], need: usize) -> Result<(), StatsError> {
    if values.is_empty() && need > 0 {
        return Err(StatsError::Empty);
    }
    if values.len() < need {
        return Err(StatsError::TooFew {
            need,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the n - 1 denominator.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub(crate) fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}
