use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{fisher_exact, StatsError, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProportionMethod {
    PooledZ,
    FisherExact,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoProportionResult {
    pub test: TestResult,
    /// `k1/n1 - k2/n2`.
    pub gap: f64,
    /// Unpooled 1-sigma error of the gap.
    pub gap_sigma: f64,
    pub method: ProportionMethod,
}

/// `P(|Z| >= |z|)` for a standard normal.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided test of equal success probability in two samples.
///
/// Uses the pooled-proportion z statistic, switching to Fisher's exact test
/// when any expected cell count falls below 5.
pub fn two_proportion_test(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<TwoProportionResult, StatsError> {
    if n1 == 0 || n2 == 0 || k1 > n1 || k2 > n2 {
        return Err(StatsError::Invalid(format!(
            "need 0 <= k <= n and n > 0, got {k1}/{n1} and {k2}/{n2}"
        )));
    }
    let (p1, p2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let gap = p1 - p2;
    let gap_sigma = (p1 * (1.0 - p1) / n1 as f64 + p2 * (1.0 - p2) / n2 as f64).sqrt();
    let h0 = "equal success probability";
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;

    if pooled == 0.0 || pooled == 1.0 {
        return Ok(TwoProportionResult {
            test: TestResult::new(0.0, 1.0, h0),
            gap,
            gap_sigma,
            method: ProportionMethod::Degenerate,
        });
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    let z = gap / se;
    let min_expected = [n1 as f64, n2 as f64]
        .iter()
        .flat_map(|&n| [n * pooled, n * (1.0 - pooled)])
        .fold(f64::INFINITY, f64::min);

    if min_expected < 5.0 {
        let fisher = fisher_exact(k1, n1 - k1, k2, n2 - k2)?;
        return Ok(TwoProportionResult {
            test: TestResult::new(z, fisher.p_value, h0),
            gap,
            gap_sigma,
            method: ProportionMethod::FisherExact,
        });
    }
    Ok(TwoProportionResult {
        test: TestResult::new(z, normal_two_sided_p(z), h0),
        gap,
        gap_sigma,
        method: ProportionMethod::PooledZ,
    })
}

/// Two-sided normal test of a reported gap against its 1-sigma error, for
/// results that are only available in summary form.
pub fn gap_z_test(gap: f64, sigma: f64) -> Result<TestResult, StatsError> {
    if !(sigma > 0.0) || !gap.is_finite() {
        return Err(StatsError::Invalid(format!("gap {gap} with sigma {sigma}")));
    }
    let z = gap / sigma;
    Ok(TestResult::new(z, normal_two_sided_p(z), "zero gap"))
}
