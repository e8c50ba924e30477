use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{canonical_text, DatasetPair, Role};
use crate::embedding::{vectors_for, EmbeddingMap};
use crate::stats::{binom_test, Sidedness, TestResult};

use super::classifier::{Example, RoleClassifier};
use super::folds::FoldPlan;
use super::SuiteError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub correct: u64,
    pub total: u64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub classifier: String,
    /// Exact binomial test of the pooled held-out accuracy against 1/2.
    pub test: TestResult,
    pub correct: u64,
    pub total: u64,
    pub pooled_accuracy: f64,
    pub mean_fold_accuracy: f64,
    /// Sample standard deviation of the per-fold accuracies.
    pub fold_sigma: f64,
    pub folds: Vec<FoldOutcome>,
}

/// Cross-validated role prediction: for each fold, train on the other folds
/// of both datasets and predict the held-out fold. All held-out predictions
/// are pooled into one binomial test.
pub fn prediction_accuracy_test(
    pair: &DatasetPair,
    embeddings: &EmbeddingMap,
    plan: &FoldPlan,
    classifier: &dyn RoleClassifier,
) -> Result<PredictionOutcome, SuiteError> {
    plan.check(pair)?;
    let mut rows: Vec<(Role, usize, &str, String, &[f64])> = Vec::with_capacity(pair.n_target() + pair.n_retro());
    for role in [Role::Target, Role::Retro] {
        let ds = pair.dataset(role);
        let vectors = vectors_for(&ds.entries, embeddings)?;
        for (e, v) in ds.entries.iter().zip(vectors) {
            let fold = plan.fold_of(role, &e.id).expect("plan checked");
            rows.push((role, fold, &e.id, canonical_text(e).into_string(), &v.values));
        }
    }

    let run_fold = |f: usize| -> Result<FoldOutcome, SuiteError> {
        let (held, train): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r.1 == f);
        let train_ids: HashSet<&str> = train.iter().map(|r| r.2).collect();
        assert!(held.iter().all(|r| !train_ids.contains(r.2)), "held-out entry in training fold");
        let train_ex: Vec<Example> = train.iter().map(|r| Example { id: r.2, text: &r.3, features: r.4 }).collect();
        let labels: Vec<Role> = train.iter().map(|r| r.0).collect();
        let test_ex: Vec<Example> = held.iter().map(|r| Example { id: r.2, text: &r.3, features: r.4 }).collect();
        let fit = classifier.fit_predict(&train_ex, &labels, &test_ex)?;
        if !fit.converged {
            log::warn!(
                "{} did not converge on fold {f}; final loss {:?}",
                classifier.name(),
                fit.final_loss
            );
        }
        let correct = fit.predictions.iter().zip(&held).filter(|(p, r)| **p == r.0).count() as u64;
        Ok(FoldOutcome { fold: f, correct, total: held.len() as u64, converged: fit.converged, final_loss: fit.final_loss })
    };
    let folds: Vec<FoldOutcome> = (0..plan.num_folds).into_par_iter().map(run_fold).collect::<Result<_, _>>()?;

    let correct: u64 = folds.iter().map(|f| f.correct).sum();
    let total: u64 = folds.iter().map(|f| f.total).sum();
    let accs: Vec<f64> = folds.iter().map(|f| f.correct as f64 / f.total as f64).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let sigma = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (accs.len() - 1) as f64).sqrt();
    let b = binom_test(correct, total, 0.5, Sidedness::TwoSided)?;
    let test = TestResult::new(correct as f64 / total as f64, b.p_value, "held-out role prediction is at chance (1/2)");
    Ok(PredictionOutcome {
        classifier: classifier.name(),
        test,
        correct,
        total,
        pooled_accuracy: correct as f64 / total as f64,
        mean_fold_accuracy: mean,
        fold_sigma: sigma,
        folds,
    })
}
