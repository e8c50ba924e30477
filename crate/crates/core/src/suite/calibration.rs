//! Type-I error of the suite's tests under a true null: one dataset split at
//! random into a pseudo target and a pseudo retro, many times over.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::embedding::EmbeddingMap;
use crate::eval::{evaluate_dataset, EvalOptions, EvalSummary, PromptVariant, SimulatedProvider};
use crate::stats::ALPHA;
use crate::synth::pseudo_split;

use super::{
    difficulty_test, prediction_accuracy_test, semantic_test, DifficultyInput, FoldPlan, LogRegConfig, LogisticClassifier,
    SemanticConfig, SuiteError,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub trials: usize,
    /// Pseudo-target size; half the dataset when absent.
    pub n_target: Option<usize>,
    pub permutation_samples: u64,
    pub folds: usize,
    pub logreg: LogRegConfig,
    /// Run the difficulty test against a simulated model.
    pub difficulty: bool,
    pub simulated_skill: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            trials: 200,
            n_target: None,
            permutation_samples: 1000,
            folds: 5,
            logreg: LogRegConfig { epochs: 200, ..Default::default() },
            difficulty: true,
            simulated_skill: 0.6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub semantic_p: f64,
    pub prediction_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty_p: Option<f64>,
}

impl TrialOutcome {
    pub fn passes(&self) -> bool {
        self.semantic_p >= ALPHA && self.prediction_p >= ALPHA && self.difficulty_p.is_none_or(|p| p >= ALPHA)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub dataset: String,
    pub config: CalibrationConfig,
    pub semantic_rate: f64,
    pub prediction_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty_rate: Option<f64>,
    /// Share of trials in which no test rejected.
    pub pass_rate: f64,
    pub trials: Vec<TrialOutcome>,
}

fn rate(trials: &[TrialOutcome], p: impl Fn(&TrialOutcome) -> f64) -> f64 {
    trials.iter().filter(|t| p(t) < ALPHA).count() as f64 / trials.len() as f64
}

pub fn run_calibration(ds: &Dataset, embeddings: &EmbeddingMap, cfg: &CalibrationConfig) -> Result<CalibrationReport, SuiteError> {
    if cfg.trials == 0 {
        return Err(SuiteError::Invalid("calibration needs at least one trial".into()));
    }
    let n_target = cfg.n_target.unwrap_or(ds.len() / 2);
    let mut trials = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let seed = crate::rng::derive_seed(cfg.seed, &format!("calibration-trial-{t}"));
        let pair = pseudo_split(ds, n_target, seed)?;
        let semantic = semantic_test(&pair, embeddings, &SemanticConfig { num_samples: cfg.permutation_samples, seed })?;
        let plan = FoldPlan::new(&pair, cfg.folds, seed)?;
        let classifier = LogisticClassifier { config: LogRegConfig { seed, ..cfg.logreg } };
        let prediction = prediction_accuracy_test(&pair, embeddings, &plan, &classifier)?;
        let difficulty_p = if cfg.difficulty {
            let provider = SimulatedProvider::new("simulated", &ds.entries, cfg.simulated_skill, seed);
            let variant = PromptVariant::standard();
            let opts = EvalOptions { seed, parallelism: 1, ..Default::default() };
            let (_, records) = evaluate_dataset(ds, &provider, &variant, &opts)?;
            let half = |d: &Dataset| -> Result<EvalSummary, SuiteError> {
                let ids: HashSet<&str> = d.entries.iter().map(|e| e.id.as_str()).collect();
                let recs: Vec<_> = records.iter().filter(|r| ids.contains(r.entry_id.as_str())).cloned().collect();
                Ok(EvalSummary::from_records(&d.name, &variant.key(), &opts, "simulated", &recs)?)
            };
            let input = DifficultyInput {
                target: half(&pair.target)?,
                retro: half(&pair.retro)?,
                pre_release: true,
                training_cutoff: None,
            };
            Some(difficulty_test(&pair, &[input])?.min_p())
        } else {
            None
        };
        trials.push(TrialOutcome { trial: t, semantic_p: semantic.min_p(), prediction_p: prediction.test.p_value, difficulty_p });
    }
    Ok(CalibrationReport {
        dataset: ds.name.clone(),
        config: *cfg,
        semantic_rate: rate(&trials, |t| t.semantic_p),
        prediction_rate: rate(&trials, |t| t.prediction_p),
        difficulty_rate: cfg.difficulty.then(|| rate(&trials, |t| t.difficulty_p.unwrap_or(1.0))),
        pass_rate: trials.iter().filter(|t| t.passes()).count() as f64 / trials.len() as f64,
        trials,
    })
}
