//! Hypothesis tests and interval estimates.
//!
//! Only the tests the indistinguishability suite needs: exact binomial,
//! pooled two-proportion, Fisher's exact on 2x2 tables, and a Monte Carlo
//! permutation test on mean within-role cosine similarity.

mod accuracy;
mod binomial;
mod fisher;
mod permutation;
mod proportion;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use accuracy::{mc_ci, mc_ci_literal, AccuracyEstimate, GapEstimate, Z_995};
pub use binomial::{binom_test, binomial_pmf};
pub use fisher::fisher_exact;
pub use permutation::{permutation_tails, permutation_test, PermutationConfig, PermutationTails, StatisticKind};
pub use proportion::{gap_z_test, normal_two_sided_p, two_proportion_test, ProportionMethod, TwoProportionResult};

/// Significance level used for every reject/accept decision.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("embeddings come from different models: {0} and {1}")]
    MixedModels(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    /// Small observed values are extreme.
    Lower,
    /// Large observed values are extreme.
    Upper,
}

/// Outcome of a single hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub h0_description: String,
    pub reject_at_5pct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_ci_halfwidth: Option<f64>,
}

impl TestResult {
    pub fn new(statistic: f64, p_value: f64, h0: impl Into<String>) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            statistic,
            p_value,
            h0_description: h0.into(),
            reject_at_5pct: p_value < ALPHA,
            mc_ci_halfwidth: None,
        }
    }

    pub fn with_mc_ci(mut self, halfwidth: f64) -> Self {
        self.mc_ci_halfwidth = Some(halfwidth);
        self
    }
}

/// `ln(k!)` for `k = 0..=n`, by cumulative summation.
pub(crate) fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0f64;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Relative slack when comparing probabilities for "as or less likely".
pub(crate) const REL_TIE: f64 = 1e-7;
