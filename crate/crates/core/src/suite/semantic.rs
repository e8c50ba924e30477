use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetPair, Role};
use crate::embedding::{vectors_for, EmbeddingMap};
use crate::stats::{mc_ci, permutation_tails, PermutationTails, TestResult, ALPHA};

use super::SuiteError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemanticConfig {
    pub num_samples: u64,
    pub seed: u64,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        SemanticConfig { num_samples: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleSemantic {
    pub role: Role,
    pub observed: f64,
    pub null_mean: f64,
    /// Share of relabelings whose statistic is at least the observed one.
    pub p_upper: f64,
    pub p_lower: f64,
    pub mc_ci_halfwidth: f64,
    /// Two-sided decision: `p_value = 2 min(p_upper, p_lower)`, so it rejects
    /// exactly when either tail falls below 2.5%.
    pub test: TestResult,
}

impl RoleSemantic {
    fn from_tails(role: Role, tails: &PermutationTails) -> Self {
        let (up, lo) = (tails.p_upper(), tails.p_lower());
        let test = TestResult::new(
            tails.observed,
            (2.0 * up.min(lo)).min(1.0),
            format!("{role} internal similarity is exchangeable with the pooled entries"),
        )
        .with_mc_ci(mc_ci(up.min(lo), tails.num_samples));
        RoleSemantic {
            role,
            observed: tails.observed,
            null_mean: tails.null_mean,
            p_upper: up,
            p_lower: lo,
            mc_ci_halfwidth: mc_ci(up, tails.num_samples),
            test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticOutcome {
    pub target: RoleSemantic,
    pub retro: RoleSemantic,
}

impl SemanticOutcome {
    pub fn rejects(&self) -> bool {
        self.target.test.reject_at_5pct || self.retro.test.reject_at_5pct
    }

    /// Smallest role p-value, the one that decides [`Self::rejects`].
    pub fn min_p(&self) -> f64 {
        self.target.test.p_value.min(self.retro.test.p_value)
    }
}

/// Permutation tests of mean internal cosine similarity, one per role.
pub fn semantic_test(pair: &DatasetPair, embeddings: &EmbeddingMap, cfg: &SemanticConfig) -> Result<SemanticOutcome, SuiteError> {
    let t = vectors_for(&pair.target.entries, embeddings)?;
    let r = vectors_for(&pair.retro.entries, embeddings)?;
    let run = |role: Role| -> Result<RoleSemantic, SuiteError> {
        let seed = crate::rng::derive_seed(cfg.seed, &format!("semantic-{role}"));
        let tails = permutation_tails(&t, &r, role, cfg.num_samples, seed)?;
        Ok(RoleSemantic::from_tails(role, &tails))
    };
    let (target, retro) = rayon::join(|| run(Role::Target), || run(Role::Retro));
    let out = SemanticOutcome { target: target?, retro: retro? };
    debug_assert_eq!(out.rejects(), out.min_p() < ALPHA);
    Ok(out)
}
