//! The four indistinguishability tests and the overall verdict.

mod calibration;
mod classifier;
mod difficulty;
mod folds;
mod logreg;
mod prediction;
mod semantic;
mod survey;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::embedding::EmbeddingError;
use crate::eval::EvalError;
use crate::stats::StatsError;

pub use calibration::{run_calibration, CalibrationConfig, CalibrationReport, TrialOutcome};
pub use classifier::{Example, ExternalCommandClassifier, FoldFit, HttpClassifier, LogisticClassifier, RoleClassifier};
pub use difficulty::{difficulty_from_reported, difficulty_test, DifficultyInput, DifficultyOutcome, DifficultyRow};
pub use folds::FoldPlan;
pub use logreg::{logistic_objective, train_logreg, LogRegConfig, LogRegModel};
pub use prediction::{prediction_accuracy_test, FoldOutcome, PredictionOutcome};
pub use semantic::{semantic_test, RoleSemantic, SemanticConfig, SemanticOutcome};
pub use survey::{
    annotate_survey, generate_survey, parse_responses_csv, responses_to_csv, score_survey, AttentionCheck, SurveyForm,
    SurveyItem, SurveyKey, SurveyOutcome, SurveyResponse, SurveyTest, INSTRUCTIONS as SURVEY_INSTRUCTIONS,
};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("not enough entries: {0}")]
    Capacity(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("model is not usable for the difficulty test: {0}")]
    NotPreRelease(String),
    #[error("unknown survey form {0:?}")]
    UnknownForm(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("classifier failed: {0}")]
    Classifier(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SufficientlyIndistinguishable,
    Rejected,
    Incomplete,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::SufficientlyIndistinguishable => "sufficiently_indistinguishable",
            Verdict::Rejected => "rejected",
            Verdict::Incomplete => "incomplete",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub group: String,
    pub test: String,
    pub value: String,
    pub p_value: f64,
    pub h0: String,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub target: String,
    pub retro: String,
    pub difficulty: Option<DifficultyOutcome>,
    pub prediction: Option<PredictionOutcome>,
    pub semantic: Option<SemanticOutcome>,
    pub human: Option<SurveyOutcome>,
    /// Survey taken by a model instead of people. Counts like any other
    /// supplied test but does not stand in for the human test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<(String, SurveyOutcome)>,
    pub rows: Vec<ReportRow>,
    pub verdict: Verdict,
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

impl SuiteReport {
    pub fn assemble(
        target: &str,
        retro: &str,
        difficulty: Option<DifficultyOutcome>,
        prediction: Option<PredictionOutcome>,
        semantic: Option<SemanticOutcome>,
        human: Option<SurveyOutcome>,
        annotator: Option<(String, SurveyOutcome)>,
    ) -> Self {
        let rejections = [
            difficulty.as_ref().map(|d| d.rejects()),
            prediction.as_ref().map(|p| p.test.reject_at_5pct),
            semantic.as_ref().map(|s| s.rejects()),
            human.as_ref().map(|h| h.test.reject_at_5pct),
        ];
        let annotator_rejects = annotator.as_ref().is_some_and(|(_, a)| a.test.reject_at_5pct);
        let verdict = if annotator_rejects || rejections.contains(&Some(true)) {
            Verdict::Rejected
        } else if rejections.contains(&None) {
            Verdict::Incomplete
        } else {
            Verdict::SufficientlyIndistinguishable
        };

        let mut rows = Vec::new();
        let row = |group: &str, test: String, value: String, t: &crate::stats::TestResult| ReportRow {
            group: group.into(),
            test,
            value,
            p_value: t.p_value,
            h0: t.h0_description.clone(),
            reject: t.reject_at_5pct,
        };
        if let Some(d) = &difficulty {
            for r in &d.rows {
                rows.push(row(
                    "similarity of difficulty",
                    format!("difficulty gap ({})", r.model_id),
                    format!("{:.1} ± {:.1}%", r.gap_pp, r.sigma_pp),
                    &r.test,
                ));
            }
        }
        if let Some(s) = &semantic {
            for rs in [&s.target, &s.retro] {
                rows.push(ReportRow {
                    // The one-sided upper tail, with the two-sided decision in `reject`.
                    p_value: rs.p_upper,
                    ..row(
                        "semantic similarity",
                        format!("{} internal similarity", rs.role),
                        format!("{:.4} (null mean {:.4}, p = {} ± {})", rs.observed, rs.null_mean, pct(rs.p_upper), pct(rs.mc_ci_halfwidth)),
                        &rs.test,
                    )
                });
            }
        }
        if let Some(p) = &prediction {
            rows.push(row(
                "prediction accuracy",
                format!("prediction accuracy ({})", p.classifier),
                format!("{:.1} ± {:.2}%", 100.0 * p.pooled_accuracy, 100.0 * p.fold_sigma),
                &p.test,
            ));
        }
        if let Some(h) = &human {
            rows.push(row("human distinguishability", "human".into(), format!("{} of {}", h.correct, h.total), &h.test));
        }
        if let Some((model, a)) = &annotator {
            rows.push(row("human distinguishability", model.clone(), format!("{} of {}", a.correct, a.total), &a.test));
        }
        SuiteReport {
            target: target.into(),
            retro: retro.into(),
            difficulty,
            prediction,
            semantic,
            human,
            annotator,
            rows,
            verdict,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# {} vs {}\n\n| group | test | value | p | reject |\n|---|---|---|---|---|\n",
            self.target, self.retro
        );
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                r.group,
                r.test,
                r.value,
                pct(r.p_value),
                if r.reject { "yes" } else { "no" }
            ));
        }
        out.push_str(&format!("\nVerdict: **{}**\n", self.verdict));
        out
    }
}
