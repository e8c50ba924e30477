use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetPair, Role};

use super::SuiteError;

/// Assignment of every entry id of both datasets to one of `num_folds` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub num_folds: usize,
    pub seed: u64,
    pub target: BTreeMap<String, usize>,
    pub retro: BTreeMap<String, usize>,
}

impl FoldPlan {
    /// Shuffles each dataset independently, then deals ids round-robin, so
    /// fold sizes within a dataset differ by at most one.
    pub fn new(pair: &DatasetPair, num_folds: usize, seed: u64) -> Result<Self, SuiteError> {
        if num_folds < 2 {
            return Err(SuiteError::Invalid(format!("need at least 2 folds, got {num_folds}")));
        }
        let deal = |role: Role| -> Result<BTreeMap<String, usize>, SuiteError> {
            let ds = pair.dataset(role);
            if ds.len() < num_folds {
                return Err(SuiteError::Invalid(format!(
                    "{} has {} entries, fewer than {num_folds} folds",
                    ds.name,
                    ds.len()
                )));
            }
            let mut ids: Vec<&str> = ds.entries.iter().map(|e| e.id.as_str()).collect();
            ids.shuffle(&mut crate::rng::from_seed(crate::rng::derive_seed(seed, role.as_str())));
            Ok(ids.into_iter().enumerate().map(|(i, id)| (id.to_string(), i % num_folds)).collect())
        };
        Ok(FoldPlan { num_folds, seed, target: deal(Role::Target)?, retro: deal(Role::Retro)? })
    }

    pub fn assignment(&self, role: Role) -> &BTreeMap<String, usize> {
        match role {
            Role::Target => &self.target,
            Role::Retro => &self.retro,
        }
    }

    pub fn fold_of(&self, role: Role, id: &str) -> Option<usize> {
        self.assignment(role).get(id).copied()
    }

    /// Checks that the plan covers exactly the entries of `pair`.
    pub fn check(&self, pair: &DatasetPair) -> Result<(), SuiteError> {
        for role in [Role::Target, Role::Retro] {
            let ds = pair.dataset(role);
            let a = self.assignment(role);
            if a.len() != ds.len() || ds.entries.iter().any(|e| a.get(&e.id).is_none_or(|&f| f >= self.num_folds)) {
                return Err(SuiteError::Invalid(format!("fold plan does not partition {}", ds.name)));
            }
        }
        Ok(())
    }
}
