use serde::{Deserialize, Serialize};

use super::{fisher_exact, StatsError};

/// Two-sided 99.5% standard normal quantile, used both for Monte Carlo
/// intervals and the per-dataset accuracy halfwidths.
pub const Z_995: f64 = 2.807;

/// Halfwidth of the Monte Carlo interval around an estimated p-value:
/// `2.807 * sqrt(p(1-p)/N)`.
pub fn mc_ci(p_hat: f64, n: u64) -> f64 {
    let n = n.max(1) as f64;
    let v = (p_hat * (1.0 - p_hat)).max(0.0);
    Z_995 * (v / n).sqrt()
}

/// The same interval written as `2.807 * p(1-p)/sqrt(N)`, without the square
/// root on the variance. Kept for comparing against reports produced that way.
pub fn mc_ci_literal(p_hat: f64, n: u64) -> f64 {
    let n = n.max(1) as f64;
    Z_995 * (p_hat * (1.0 - p_hat)).max(0.0) / n.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEstimate {
    pub correct: u64,
    pub total: u64,
    pub acc: f64,
    pub sigma: f64,
}

impl AccuracyEstimate {
    pub fn new(correct: u64, total: u64) -> Result<Self, StatsError> {
        if correct > total {
            return Err(StatsError::Invalid(format!("{correct} correct out of {total}")));
        }
        if total == 0 {
            return Err(StatsError::Insufficient("accuracy over zero entries".into()));
        }
        let acc = correct as f64 / total as f64;
        Ok(AccuracyEstimate {
            correct,
            total,
            acc,
            sigma: (acc * (1.0 - acc) / total as f64).sqrt(),
        })
    }
}

/// Accuracy gap between a public benchmark and its holdout, in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub acc_target: AccuracyEstimate,
    pub acc_retro: AccuracyEstimate,
    /// Positive when the model scores higher on the target.
    pub gap_pp: f64,
    /// 99.5% halfwidth on the target accuracy, in points.
    pub u_p: f64,
    /// 99.5% halfwidth on the retro accuracy, in points.
    pub u_h: f64,
    /// `u_p + u_h`: a 99% bound on the gap by the union bound.
    pub bound_99: f64,
    pub fisher_p: f64,
}

impl GapEstimate {
    pub fn new(acc_target: AccuracyEstimate, acc_retro: AccuracyEstimate) -> Result<Self, StatsError> {
        let u_p = 100.0 * Z_995 * acc_target.sigma;
        let u_h = 100.0 * Z_995 * acc_retro.sigma;
        let fisher = fisher_exact(
            acc_target.correct,
            acc_target.total - acc_target.correct,
            acc_retro.correct,
            acc_retro.total - acc_retro.correct,
        )?;
        Ok(GapEstimate {
            acc_target,
            acc_retro,
            gap_pp: 100.0 * (acc_target.acc - acc_retro.acc),
            u_p,
            u_h,
            bound_99: u_p + u_h,
            fisher_p: fisher.p_value,
        })
    }
}
