//! L2-regularized logistic regression by gradient descent.
//!
//! The objective is `(1/N)·Σ log(1 + exp(−ỹ·(w·x + b))) + reg/(2N)·‖w‖²`
//! with `ỹ ∈ {−1, +1}`; the bias is unregularized. Minimized from zero
//! initialization by gradient descent with Armijo backtracking until the
//! gradient norm falls below `1e-6` or the iteration cap; deterministic.

use super::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl LogisticModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(crate::linalg::dot(&self.weights, x) + self.bias)
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

/// `log(1 + exp(-t))` without overflow.
fn log1p_exp_neg(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

pub(crate) fn logistic_objective(
    features: &[Vec<f64>],
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    reg: f64,
) -> f64 {
    let n = features.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let z = crate::linalg::dot(weights, x) + bias;
        loss += log1p_exp_neg(sign * z);
    }
    let penalty: f64 = weights.iter().map(|w| w * w).sum();
    loss / n + reg * penalty / (2.0 * n)
}

fn gradient(
    features: &[Vec<f64>],
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    reg: f64,
) -> (Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let z = crate::linalg::dot(weights, x) + bias;
        let residual = sigmoid(z) - f64::from(y);
        for (g, &xv) in gw.iter_mut().zip(x) {
            *g += residual * xv;
        }
        gb += residual;
    }
    for (g, &w) in gw.iter_mut().zip(weights) {
        *g = (*g + reg * w) / n;
    }
    (gw, gb / n)
}

/// Fit on a training partition. Both classes must be present.
pub fn logistic_fit(
    features: &[Vec<f64>],
    labels: &[u8],
    reg: f64,
) -> Result<LogisticModel, EvalError> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(EvalError::DataMismatch(format!(
            "{} feature rows vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|x| x.len() != dim) {
        return Err(EvalError::DataMismatch("ragged feature rows".into()));
    }
    if reg < 0.0 {
        return Err(EvalError::InvalidConfig("regularization must be >= 0".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(EvalError::DegenerateFit);
    }

    const TOL: f64 = 1e-6;
    const MAX_ITERS: usize = 10_000;
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut step: f64 = 1.0;
    let mut value = logistic_objective(features, labels, &weights, bias, reg);
    let mut iterations = 0;
    let mut grad_norm = f64::INFINITY;
    while iterations < MAX_ITERS {
        let (gw, gb) = gradient(features, labels, &weights, bias, reg);
        grad_norm = (crate::linalg::dot(&gw, &gw) + gb * gb).sqrt();
        if grad_norm < TOL {
            break;
        }
        // Armijo backtracking from a step that grows again after successes.
        step = (step * 2.0).min(1e4);
        loop {
            let trial_w: Vec<f64> = weights.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
            let trial_b = bias - step * gb;
            let trial_value = logistic_objective(features, labels, &trial_w, trial_b, reg);
            if trial_value <= value - 1e-4 * step * grad_norm * grad_norm || step < 1e-16 {
                weights = trial_w;
                bias = trial_b;
                value = trial_value;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
    }
    Ok(LogisticModel {
        weights,
        bias,
        iterations,
        grad_norm,
    })
}
