//! L2-regularized logistic regression trained by full-batch gradient descent.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SuiteError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub l2: f64,
    pub epochs: usize,
    /// Initial step size; each step backtracks from here until the loss drops enough.
    pub lr: f64,
    pub seed: u64,
    /// Gradient norm below which training stops as converged.
    pub tol: f64,
    /// Weight each class by `n / (2 n_class)` so both roles count equally.
    pub balanced: bool,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig { l2: 1e-2, epochs: 500, lr: 1.0, seed: 0, tol: 1e-6, balanced: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub bias: f64,
    /// Weights on standardized features.
    pub weights: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub loss_history: Vec<f64>,
    pub converged: bool,
}

impl LogRegModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias
            + x.iter()
                .zip(&self.weights)
                .zip(self.mean.iter().zip(&self.scale))
                .map(|((v, w), (m, s))| w * (v - m) / s)
                .sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }

    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(f64::NAN)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Weighted mean log loss plus `l2/2 * |w|^2`, and its gradient.
/// `params[0]` is the bias, which is not penalized.
pub fn logistic_objective(params: &[f64], x: &[Vec<f64>], y: &[bool], sample_weight: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let total_w: f64 = sample_weight.iter().sum();
    for ((row, &label), &w) in x.iter().zip(y).zip(sample_weight) {
        let z = params[0] + row.iter().zip(&params[1..]).map(|(a, b)| a * b).sum::<f64>();
        let t = if label { 1.0 } else { 0.0 };
        loss += w * (softplus(z) - t * z);
        let r = w * (sigmoid(z) - t);
        grad[0] += r;
        for (g, v) in grad[1..].iter_mut().zip(row) {
            *g += r * v;
        }
    }
    loss /= total_w;
    for g in &mut grad {
        *g /= total_w;
    }
    for (g, p) in grad[1..].iter_mut().zip(&params[1..]) {
        *g += l2 * p;
    }
    loss += 0.5 * l2 * params[1..].iter().map(|p| p * p).sum::<f64>();
    (loss, grad)
}

/// Fits on standardized copies of `features`; `labels[i]` is the positive class.
pub fn train_logreg(features: &[Vec<f64>], labels: &[bool], cfg: &LogRegConfig) -> Result<LogRegModel, SuiteError> {
    if features.len() != labels.len() {
        return Err(SuiteError::Invalid(format!("{} feature rows for {} labels", features.len(), labels.len())));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos < 2 || n_neg < 2 {
        return Err(SuiteError::Invalid(format!("need 2 examples per class, got {n_pos} and {n_neg}")));
    }
    if !(cfg.l2 >= 0.0 && cfg.lr > 0.0 && cfg.epochs > 0) {
        return Err(SuiteError::Invalid("l2 must be non-negative, lr and epochs positive".into()));
    }
    let dim = features[0].len();
    if features.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
        return Err(SuiteError::Invalid("feature rows must be finite and of equal length".into()));
    }

    let n = features.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| features.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..dim)
        .map(|j| {
            let sd = (features.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 1e-12 { sd } else { 1.0 }
        })
        .collect();
    let x: Vec<Vec<f64>> =
        features.iter().map(|r| r.iter().zip(mean.iter().zip(&scale)).map(|(v, (m, s))| (v - m) / s).collect()).collect();
    let sample_weight: Vec<f64> = labels
        .iter()
        .map(|&l| if !cfg.balanced { 1.0 } else if l { n / (2.0 * n_pos as f64) } else { n / (2.0 * n_neg as f64) })
        .collect();

    let mut rng = crate::rng::from_seed(cfg.seed);
    let mut params: Vec<f64> = std::iter::once(0.0).chain((0..dim).map(|_| rng.random_range(-0.01..0.01))).collect();
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let mut converged = false;
    let mut step = cfg.lr;
    let (mut loss, mut grad) = logistic_objective(&params, &x, labels, &sample_weight, cfg.l2);
    history.push(loss);
    for _ in 0..cfg.epochs {
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2.sqrt() < cfg.tol {
            converged = true;
            break;
        }
        // Armijo backtracking keeps every accepted step a descent step.
        let mut accepted = None;
        while step > 1e-14 {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let (l, g) = logistic_objective(&trial, &x, labels, &sample_weight, cfg.l2);
            if l <= loss - 1e-4 * step * g2 {
                accepted = Some((trial, l, g));
                break;
            }
            step *= 0.5;
        }
        let Some((p, l, g)) = accepted else {
            break;
        };
        debug_assert!(l <= loss, "training loss increased");
        params = p;
        loss = l;
        grad = g;
        history.push(loss);
        step = (step * 2.0).min(cfg.lr);
    }
    if !converged && grad.iter().map(|g| g * g).sum::<f64>().sqrt() < cfg.tol {
        converged = true;
    }
    Ok(LogRegModel { bias: params[0], weights: params[1..].to_vec(), mean, scale, loss_history: history, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn separable_toy() {
        let x = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]];
        let y = [true, true, false, false];
        let m = train_logreg(&x, &y, &LogRegConfig::default()).unwrap();
        assert!(m.decision(&[0.0]).abs() < 1e-6);
        assert!(x.iter().zip(&y).all(|(r, &l)| m.predict(r) == l));
    }

    #[test]
    fn no_signal_gives_prior_bias() {
        let x = vec![vec![3.0, -1.0]; 10];
        let y = [true, true, true, false, false, false, false, false, false, false];
        let cfg = LogRegConfig { balanced: false, ..Default::default() };
        let m = train_logreg(&x, &y, &cfg).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-3), "{:?}", m.weights);
        assert!((m.bias - (3.0f64 / 7.0).ln()).abs() < 1e-4, "{}", m.bias);
        let balanced = train_logreg(&x, &y, &LogRegConfig::default()).unwrap();
        assert!(balanced.bias.abs() < 1e-4);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![1.0]; 4];
        assert!(train_logreg(&x, &[true; 4], &LogRegConfig::default()).is_err());
        assert!(train_logreg(&x, &[true, true, true, false], &LogRegConfig::default()).is_err());
    }

    #[test]
    fn deterministic_and_monotone() {
        let mut rng = crate::rng::from_seed(4);
        let x: Vec<Vec<f64>> = (0..60).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<bool> = (0..60).map(|i| i % 3 == 0).collect();
        let cfg = LogRegConfig { seed: 9, ..Default::default() };
        let a = train_logreg(&x, &y, &cfg).unwrap();
        assert_eq!(a, train_logreg(&x, &y, &cfg).unwrap());
        assert!(a.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gradient_matches_finite_differences(seed in any::<u64>(), n in 3usize..12, d in 1usize..5, l2 in 0.0f64..1.0) {
            let mut rng = crate::rng::from_seed(seed);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            let p: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = logistic_objective(&p, &x, &y, &w, l2);
            let h = 1e-5;
            for j in 0..=d {
                let mut up = p.clone();
                up[j] += h;
                let mut dn = p.clone();
                dn[j] -= h;
                let fd = (logistic_objective(&up, &x, &y, &w, l2).0 - logistic_objective(&dn, &x, &y, &w, l2).0) / (2.0 * h);
                prop_assert!((fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1e-3), "j={} fd={} g={}", j, fd, g[j]);
            }
        }
    }
}
