use super::{ln_factorials, StatsError, TestResult, REL_TIE};

/// Tables up to this total are evaluated with exact integer weights; every
/// `C(r1, x) * C(r2, y)` is bounded by `C(n, n/2)` which fits in a `u128`.
const EXACT_LIMIT: u64 = 120;

fn choose_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * (n as u128 - i) / (i + 1);
    }
    c
}

fn log_space_p(a: u64, r1: u64, r2: u64, c1: u64) -> f64 {
    let n = r1 + r2;
    let lf = ln_factorials(n);
    let ln_c = |n: u64, k: u64| lf[n as usize] - lf[k as usize] - lf[(n - k) as usize];
    let ln_total = ln_c(n, c1);
    let prob = |x: u64| (ln_c(r1, x) + ln_c(r2, c1 - x) - ln_total).exp();
    let cutoff = prob(a) * (1.0 + REL_TIE);
    (c1.saturating_sub(r2)..=c1.min(r1)).map(prob).filter(|&q| q <= cutoff).sum()
}

/// Two-sided Fisher's exact test on the 2x2 table `[[a, b], [c, d]]`.
///
/// With margins fixed, sums the hypergeometric probabilities of every table no
/// more likely than the observed one. The statistic is the sample odds ratio
/// with a 0.5 continuity correction. A table with an empty row is an error; an
/// empty column admits a single table and yields p = 1.
pub fn fisher_exact(a: u64, b: u64, c: u64, d: u64) -> Result<TestResult, StatsError> {
    let (r1, r2) = (a + b, c + d);
    if r1 == 0 || r2 == 0 {
        return Err(StatsError::Invalid(format!(
            "2x2 table [[{a}, {b}], [{c}, {d}]] has an all-zero row margin"
        )));
    }
    let c1 = a + c;
    let n = r1 + r2;
    let lo = c1.saturating_sub(r2);
    let hi = c1.min(r1);

    let p = if n <= EXACT_LIMIT {
        let weight = |x: u64| choose_u128(r1, x) * choose_u128(r2, c1 - x);
        let observed = weight(a);
        let (mut extreme, mut total) = (0u128, 0u128);
        for x in lo..=hi {
            let w = weight(x);
            total += w;
            if w <= observed {
                extreme += w;
            }
        }
        extreme as f64 / total as f64
    } else {
        log_space_p(a, r1, r2, c1)
    };

    let odds = ((a as f64 + 0.5) * (d as f64 + 0.5)) / ((b as f64 + 0.5) * (c as f64 + 0.5));
    Ok(TestResult::new(odds, p.min(1.0), "rows share the same success probability"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_table_is_unit() {
        assert!((fisher_exact(5, 5, 5, 5).unwrap().p_value - 1.0).abs() < 1e-15);
        assert!((fisher_exact(7, 3, 7, 3).unwrap().p_value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perfectly_separated_table() {
        // only tables x=0 and x=10 are as extreme: 2 / C(20, 10)
        let p = fisher_exact(10, 0, 0, 10).unwrap().p_value;
        assert!((p - 2.0 / 184756.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_under_row_and_column_swap() {
        for (a, b, c, d) in [(3, 7, 9, 2), (0, 4, 6, 1), (12, 30, 5, 40)] {
            let p = fisher_exact(a, b, c, d).unwrap().p_value;
            let q = fisher_exact(d, c, b, a).unwrap().p_value;
            assert!((p - q).abs() < 1e-12);
            assert!(p > 0.0 && p <= 1.0);
        }
    }

    #[test]
    fn log_space_path_agrees_with_exact_weights() {
        for r1 in 1..=12u64 {
            for r2 in 1..=12u64 {
                for c1 in 0..=(r1 + r2) {
                    for a in c1.saturating_sub(r2)..=c1.min(r1) {
                        let exact = fisher_exact(a, r1 - a, c1 - a, r2 - (c1 - a)).unwrap().p_value;
                        let float = log_space_p(a, r1, r2, c1).min(1.0);
                        assert!((exact - float).abs() < 1e-10, "{a} {r1} {r2} {c1}");
                    }
                }
            }
        }
    }

    #[test]
    fn large_tables_use_log_space() {
        let p = fisher_exact(90, 10, 30, 10).unwrap().p_value;
        assert!(p > 0.0 && p < 0.05, "{p}");
        assert!((fisher_exact(70, 70, 70, 70).unwrap().p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_margins() {
        assert!(fisher_exact(0, 0, 3, 4).is_err());
        assert_eq!(fisher_exact(5, 0, 7, 0).unwrap().p_value, 1.0);
    }
}
