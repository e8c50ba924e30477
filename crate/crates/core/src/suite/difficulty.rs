use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetPair;
use crate::eval::{paired_estimates, EvalSummary};
use crate::stats::{gap_z_test, two_proportion_test, ProportionMethod, TestResult};

use super::SuiteError;

/// Evaluations of one model on both datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyInput {
    pub target: EvalSummary,
    pub retro: EvalSummary,
    /// Operator's attestation that the model predates the target's release.
    pub pre_release: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_cutoff: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyRow {
    pub model_id: String,
    pub test: TestResult,
    /// Target minus retro accuracy, in points.
    pub gap_pp: f64,
    pub sigma_pp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<ProportionMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<[u64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyOutcome {
    pub rows: Vec<DifficultyRow>,
}

impl DifficultyOutcome {
    pub fn rejects(&self) -> bool {
        self.rows.iter().any(|r| r.test.reject_at_5pct)
    }

    pub fn min_p(&self) -> f64 {
        self.rows.iter().map(|r| r.test.p_value).fold(1.0, f64::min)
    }
}

/// Two-proportion test per pre-release model, on one observation per entry.
pub fn difficulty_test(pair: &DatasetPair, inputs: &[DifficultyInput]) -> Result<DifficultyOutcome, SuiteError> {
    if inputs.is_empty() {
        return Err(SuiteError::Invalid("difficulty test needs at least one model".into()));
    }
    let mut rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        let model = &input.target.model_id;
        if !input.pre_release {
            return Err(SuiteError::NotPreRelease(format!("{model} is not attested as pre-release")));
        }
        if let (Some(cutoff), Some(release)) = (input.training_cutoff, pair.target.release_date) {
            if cutoff >= release {
                return Err(SuiteError::NotPreRelease(format!(
                    "{model} training cutoff {cutoff} is not before the {} release date {release}",
                    pair.target.name
                )));
            }
        }
        for (summary, ds) in [(&input.target, &pair.target), (&input.retro, &pair.retro)] {
            if summary.dataset != ds.name {
                return Err(SuiteError::Invalid(format!(
                    "{model}: summary is for {}, expected {}",
                    summary.dataset, ds.name
                )));
            }
        }
        let (t, r) = paired_estimates(&input.target, &input.retro)?;
        let res = two_proportion_test(t.correct, t.total, r.correct, r.total)?;
        rows.push(DifficultyRow {
            model_id: model.clone(),
            test: res.test,
            gap_pp: 100.0 * res.gap,
            sigma_pp: 100.0 * res.gap_sigma,
            method: Some(res.method),
            counts: Some([t.correct, t.total, r.correct, r.total]),
        });
    }
    Ok(DifficultyOutcome { rows })
}

/// A difficulty row from a published gap and its standard error, both in points.
pub fn difficulty_from_reported(model_id: &str, gap_pp: f64, sigma_pp: f64) -> Result<DifficultyRow, SuiteError> {
    Ok(DifficultyRow {
        model_id: model_id.to_string(),
        test: gap_z_test(gap_pp, sigma_pp)?,
        gap_pp,
        sigma_pp,
        method: None,
        counts: None,
    })
}
