use super::{ln_factorials, Sidedness, StatsError, TestResult, REL_TIE};

/// P(X = k) for X ~ Binomial(n, p0), for every k in `0..=n`.
pub fn binomial_pmf(n: u64, p0: f64) -> Vec<f64> {
    let lf = ln_factorials(n);
    let (lp, lq) = (p0.ln(), (1.0 - p0).ln());
    (0..=n)
        .map(|k| {
            let ln_c = lf[n as usize] - lf[k as usize] - lf[(n - k) as usize];
            (ln_c + k as f64 * lp + (n - k) as f64 * lq).exp()
        })
        .collect()
}

/// Exact binomial test of `k` successes in `n` trials against success
/// probability `p0`.
///
/// The two-sided p-value sums the probabilities of all outcomes no more likely
/// than the observed one. The statistic is the observed proportion.
pub fn binom_test(k: u64, n: u64, p0: f64, sidedness: Sidedness) -> Result<TestResult, StatsError> {
    if n == 0 || k > n {
        return Err(StatsError::Invalid(format!("need 0 <= k <= n and n > 0, got k={k}, n={n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::Invalid(format!("p0 must lie in (0, 1), got {p0}")));
    }
    let pmf = binomial_pmf(n, p0);
    let k = k as usize;
    let p = match sidedness {
        Sidedness::Lower => pmf[..=k].iter().sum::<f64>(),
        Sidedness::Upper => pmf[k..].iter().sum::<f64>(),
        Sidedness::TwoSided => {
            let cutoff = pmf[k] * (1.0 + REL_TIE);
            pmf.iter().filter(|&&x| x <= cutoff).sum::<f64>()
        }
    };
    Ok(TestResult::new(
        k as f64 / n as f64,
        p.min(1.0),
        format!("success probability = {p0:.6}"),
    ))
}
