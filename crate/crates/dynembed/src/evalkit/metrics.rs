//! Classification metrics. AUC uses the rank-sum (Mann-Whitney) statistic
//! with tied scores counted half, which is exact and oracle-checkable.

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
}

/// Metrics that survive a single-class holdout: accuracy is always defined,
/// the rest only when the relevant class is present.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PartialMetrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
}

/// Strict variant: errors when any metric is undefined.
pub fn binary_metrics(y_true: &[u8], scores: &[f64], threshold: f64) -> Result<Metrics, EvalError> {
    let partial = partial_metrics(y_true, scores, threshold)?;
    match (partial.sensitivity, partial.specificity, partial.auc) {
        (Some(sensitivity), Some(specificity), Some(auc)) => Ok(Metrics {
            accuracy: partial.accuracy,
            sensitivity,
            specificity,
            auc,
        }),
        _ => Err(EvalError::Undefined(
            "sensitivity/specificity/AUC need both classes present".into(),
        )),
    }
}

/// Confusion counts at `score >= threshold`, rank AUC, partial results for
/// single-class inputs.
pub fn partial_metrics(
    y_true: &[u8],
    scores: &[f64],
    threshold: f64,
) -> Result<PartialMetrics, EvalError> {
    if y_true.len() != scores.len() || y_true.is_empty() {
        return Err(EvalError::DataMismatch(format!(
            "{} labels vs {} scores",
            y_true.len(),
            scores.len()
        )));
    }
    if y_true.iter().any(|&y| y > 1) {
        return Err(EvalError::DataMismatch("labels must be 0 or 1".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::DataMismatch("non-finite score".into()));
    }
    let (mut tp, mut fp, mut tn, mut fne) = (0usize, 0usize, 0usize, 0usize);
    for (&y, &s) in y_true.iter().zip(scores) {
        let predicted_positive = s >= threshold;
        match (y, predicted_positive) {
            (1, true) => tp += 1,
            (1, false) => fne += 1,
            (0, true) => fp += 1,
            (0, false) => tn += 1,
            _ => unreachable!(),
        }
    }
    let positives = tp + fne;
    let negatives = tn + fp;
    let accuracy = (tp + tn) as f64 / y_true.len() as f64;
    let sensitivity = (positives > 0).then(|| tp as f64 / positives as f64);
    let specificity = (negatives > 0).then(|| tn as f64 / negatives as f64);
    let auc = (positives > 0 && negatives > 0).then(|| rank_auc(y_true, scores));
    Ok(PartialMetrics {
        accuracy,
        sensitivity,
        specificity,
        auc,
    })
}

/// AUC from average ranks: `(R⁺ − P(P+1)/2) / (P·N)` where `R⁺` is the rank
/// sum of the positive class, tied runs sharing their average rank.
fn rank_auc(y_true: &[u8], scores: &[f64]) -> f64 {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut positives = 0usize;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; a tied run [i, j] shares the average rank.
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if y_true[idx] == 1 {
                rank_sum_pos += avg_rank;
                positives += 1;
            }
        }
        i = j + 1;
    }
    let negatives = n - positives;
    let u = rank_sum_pos - (positives * (positives + 1)) as f64 / 2.0;
    u / (positives as f64 * negatives as f64)
}
