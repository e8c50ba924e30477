use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mc_ci, Sidedness, StatsError, TestResult};
use crate::dataset::Role;
use crate::embedding::{cosine_with_norms, validated_norms, EmbeddingVector};

/// Samples per independently seeded chunk. Fixed so results do not depend on
/// the thread count.
const CHUNK: u64 = 1024;
/// Absolute slack when deciding "at least as extreme".
const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// Mean cosine similarity over all pairs inside one role.
    #[default]
    MeanInternalSimilarityOfRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PermutationConfig {
    pub statistic_kind: StatisticKind,
    pub role: Role,
    pub num_samples: u64,
    pub seed: u64,
    pub sidedness: Sidedness,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            statistic_kind: StatisticKind::default(),
            role: Role::Target,
            num_samples: 10_000,
            seed: 0,
            sidedness: Sidedness::TwoSided,
        }
    }
}

/// Raw Monte Carlo tail counts for one role's internal-similarity statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationTails {
    pub observed: f64,
    /// Mean over all pooled pairs; the expected statistic under relabeling.
    pub null_mean: f64,
    pub num_samples: u64,
    pub at_least: u64,
    pub at_most: u64,
    pub as_far_from_mean: u64,
}

impl PermutationTails {
    fn smoothed(&self, count: u64) -> f64 {
        (1 + count) as f64 / (self.num_samples + 1) as f64
    }

    pub fn p_upper(&self) -> f64 {
        self.smoothed(self.at_least)
    }

    pub fn p_lower(&self) -> f64 {
        self.smoothed(self.at_most)
    }

    pub fn p_two_sided(&self) -> f64 {
        self.smoothed(self.as_far_from_mean)
    }

    pub fn p(&self, sidedness: Sidedness) -> f64 {
        match sidedness {
            Sidedness::Upper => self.p_upper(),
            Sidedness::Lower => self.p_lower(),
            Sidedness::TwoSided => self.p_two_sided(),
        }
    }
}

struct Pool {
    n: usize,
    sim: Vec<f64>,
    row_sums: Vec<f64>,
    total: f64,
}

impl Pool {
    fn build(vectors: &[&EmbeddingVector]) -> Result<Pool, StatsError> {
        if let Some(first) = vectors.first() {
            if let Some(other) = vectors.iter().find(|v| v.model_id != first.model_id) {
                return Err(StatsError::MixedModels(first.model_id.clone(), other.model_id.clone()));
            }
        }
        let norms = validated_norms(vectors).map_err(|e| StatsError::Invalid(e.to_string()))?;
        let n = vectors.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            cosine_with_norms(&vectors[i].values, &vectors[j].values, norms[i], norms[j])
                        }
                    })
                    .collect()
            })
            .collect();
        let row_sums: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
        let total = row_sums.iter().sum::<f64>() / 2.0;
        Ok(Pool { n, sim: rows.concat(), row_sums, total })
    }

    fn internal_sum(&self, idx: &[usize]) -> f64 {
        let mut s = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            let row = &self.sim[i * self.n..(i + 1) * self.n];
            for &j in &idx[a + 1..] {
                s += row[j];
            }
        }
        s
    }

    /// Sum of internal pairs of the subset whose complement is `idx`.
    fn complement_sum(&self, idx: &[usize]) -> f64 {
        let touching: f64 = idx.iter().map(|&i| self.row_sums[i]).sum();
        self.total - touching + self.internal_sum(idx)
    }
}

fn pairs(m: usize) -> f64 {
    (m * (m - 1) / 2) as f64
}

/// Monte Carlo distribution of the mean internal cosine of a role under random
/// relabeling of the pooled entries, with role sizes preserved.
pub fn permutation_tails(
    target: &[&EmbeddingVector],
    retro: &[&EmbeddingVector],
    role: Role,
    num_samples: u64,
    seed: u64,
) -> Result<PermutationTails, StatsError> {
    if target.len() < 2 || retro.len() < 2 {
        return Err(StatsError::Insufficient(format!(
            "each role needs at least 2 entries, got {} target and {} retro",
            target.len(),
            retro.len()
        )));
    }
    if num_samples < 100 {
        return Err(StatsError::Invalid(format!("need at least 100 permutations, got {num_samples}")));
    }
    let pooled: Vec<&EmbeddingVector> = target.iter().chain(retro).copied().collect();
    let pool = Pool::build(&pooled)?;
    let n = pool.n;
    let (m, start) = match role {
        Role::Target => (target.len(), 0),
        Role::Retro => (retro.len(), target.len()),
    };
    let own: Vec<usize> = (start..start + m).collect();
    let observed = pool.internal_sum(&own) / pairs(m);
    let null_mean = pool.total / pairs(n);

    // Sample whichever side of the split is smaller.
    let sample_role = m <= n - m;
    let s = if sample_role { m } else { n - m };
    let statistic = |idx: &[usize]| {
        let sum = if sample_role { pool.internal_sum(idx) } else { pool.complement_sum(idx) };
        sum / pairs(m)
    };

    let dev = (observed - null_mean).abs();
    let chunks = num_samples.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = crate::rng::stream(seed, c);
            let len = CHUNK.min(num_samples - c * CHUNK);
            let mut tally = [0u64; 3];
            let mut idx = Vec::with_capacity(s);
            for _ in 0..len {
                idx.clear();
                idx.extend(sample(&mut rng, n, s).into_iter());
                let g = statistic(&idx);
                tally[0] += (g >= observed - TIE_TOL) as u64;
                tally[1] += (g <= observed + TIE_TOL) as u64;
                tally[2] += ((g - null_mean).abs() >= dev - TIE_TOL) as u64;
            }
            tally
        })
        .reduce(|| [0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);

    Ok(PermutationTails {
        observed,
        null_mean,
        num_samples,
        at_least: counts[0],
        at_most: counts[1],
        as_far_from_mean: counts[2],
    })
}

/// Permutation test of "both roles are exchangeable" using the mean internal
/// cosine similarity of `cfg.role`. The p-value carries add-one smoothing.
pub fn permutation_test(
    target: &[&EmbeddingVector],
    retro: &[&EmbeddingVector],
    cfg: &PermutationConfig,
) -> Result<TestResult, StatsError> {
    let tails = permutation_tails(target, retro, cfg.role, cfg.num_samples, cfg.seed)?;
    let p = tails.p(cfg.sidedness);
    Ok(TestResult::new(
        tails.observed,
        p,
        format!("{} internal similarity is exchangeable with the pooled entries", cfg.role),
    )
    .with_mc_ci(mc_ci(p, cfg.num_samples)))
}
