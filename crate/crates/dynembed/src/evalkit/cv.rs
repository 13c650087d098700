//! Cross-validation protocols and the evaluation report.

use super::{
    logistic_fit, partial_metrics, stratified_kfold, EvalError, LabeledEmbedding, PartialMetrics,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Protocol {
    StratifiedK { k: usize },
    LeaveOneSiteOut,
}

impl Protocol {
    /// Parse CLI spellings: `stratified10`, `stratified-5`, `loso`,
    /// `leave-one-site-out`.
    pub fn parse(s: &str) -> Result<Self, EvalError> {
        let lower = s.to_ascii_lowercase();
        if lower == "loso" || lower == "leave-one-site-out" {
            return Ok(Protocol::LeaveOneSiteOut);
        }
        if let Some(rest) = lower.strip_prefix("stratified") {
            let digits = rest.trim_start_matches('-');
            if let Ok(k) = digits.parse::<usize>() {
                return Ok(Protocol::StratifiedK { k });
            }
        }
        Err(EvalError::InvalidConfig(format!(
            "unknown protocol `{s}` (expected stratified<k> or leave-one-site-out)"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub seed: u64,
    pub regularization: f64,
    pub threshold: f64,
    /// Z-score embeddings per dimension using training-fold statistics.
    pub normalize: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            protocol: Protocol::StratifiedK { k: 10 },
            seed: 0,
            regularization: 1.0,
            threshold: 0.5,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub name: String,
    pub test_size: usize,
    pub positives: usize,
    pub negatives: usize,
    pub test_ids: Vec<String>,
    #[serde(flatten)]
    pub metrics: PartialMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub folds: usize,
}

fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanStd {
        mean,
        std: var.sqrt(),
        folds: values.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub accuracy: Option<MeanStd>,
    pub sensitivity: Option<MeanStd>,
    pub specificity: Option<MeanStd>,
    pub auc: Option<MeanStd>,
}

/// Full evaluation output; serializes to the report.json artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub positive_class: String,
    pub items: usize,
    pub folds: Vec<FoldReport>,
    pub aggregate: AggregateReport,
}

/// Fit/score over the protocol's folds. Fitting sees only the training
/// partition; normalization statistics come from the training fold alone.
pub fn run_cv(items: &[LabeledEmbedding], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    for item in items {
        item.validate()?;
    }
    if items.is_empty() {
        return Err(EvalError::DataMismatch("no embeddings to evaluate".into()));
    }
    let dim = items[0].vector.len();
    if items.iter().any(|i| i.vector.len() != dim) {
        return Err(EvalError::DataMismatch("inconsistent embedding dimensions".into()));
    }
    if cfg.regularization < 0.0 {
        return Err(EvalError::InvalidConfig("regularization must be >= 0".into()));
    }

    let folds: Vec<(String, Vec<usize>)> = match cfg.protocol {
        Protocol::StratifiedK { k } => {
            let labels: Vec<u8> = items.iter().map(|i| i.label).collect();
            stratified_kfold(&labels, k, cfg.seed)?
                .into_iter()
                .enumerate()
                .map(|(f, idx)| (format!("fold_{f:02}"), idx))
                .collect()
        }
        Protocol::LeaveOneSiteOut => {
            let mut sites: Vec<String> = items.iter().map(|i| i.site.clone()).collect();
            sites.sort();
            sites.dedup();
            if sites.len() < 2 {
                return Err(EvalError::InvalidConfig(format!(
                    "leave-one-site-out needs >= 2 sites, found {}",
                    sites.len()
                )));
            }
            sites
                .into_iter()
                .map(|site| {
                    let idx = items
                        .iter()
                        .enumerate()
                        .filter(|(_, it)| it.site == site)
                        .map(|(i, _)| i)
                        .collect();
                    (site, idx)
                })
                .collect()
        }
    };

    let mut fold_reports = Vec::with_capacity(folds.len());
    for (name, test_idx) in folds {
        let is_test = {
            let mut mask = vec![false; items.len()];
            for &i in &test_idx {
                mask[i] = true;
            }
            mask
        };
        let train_idx: Vec<usize> = (0..items.len()).filter(|&i| !is_test[i]).collect();
        let report = evaluate_fold(items, &train_idx, &test_idx, name, cfg)?;
        fold_reports.push(report);
    }

    let collect = |f: &dyn Fn(&FoldReport) -> Option<f64>| -> Vec<f64> {
        fold_reports.iter().filter_map(f).collect()
    };
    let aggregate = AggregateReport {
        accuracy: mean_std(&collect(&|r| Some(r.metrics.accuracy))),
        sensitivity: mean_std(&collect(&|r| r.metrics.sensitivity)),
        specificity: mean_std(&collect(&|r| r.metrics.specificity)),
        auc: mean_std(&collect(&|r| r.metrics.auc)),
    };
    Ok(EvalReport {
        config: *cfg,
        positive_class: "label 1 (case)".to_string(),
        items: items.len(),
        folds: fold_reports,
        aggregate,
    })
}

fn evaluate_fold(
    items: &[LabeledEmbedding],
    train_idx: &[usize],
    test_idx: &[usize],
    name: String,
    cfg: &EvalConfig,
) -> Result<FoldReport, EvalError> {
    let dim = items[0].vector.len();
    // Per-dimension z-scoring from training statistics; constant dimensions
    // collapse to zero.
    let (shift, scale) = if cfg.normalize {
        let n = train_idx.len() as f64;
        let mut mean = vec![0.0; dim];
        for &i in train_idx {
            for (m, v) in mean.iter_mut().zip(&items[i].vector) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for &i in train_idx {
            for (s, (v, m)) in var.iter_mut().zip(items[i].vector.iter().zip(&mean)) {
                *s += (v - m).powi(2);
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|&s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        (mean, scale)
    } else {
        (vec![0.0; dim], vec![1.0; dim])
    };
    let transform = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(shift.iter().zip(&scale))
            .map(|(x, (m, s))| (x - m) * s)
            .collect()
    };

    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| transform(&items[i].vector)).collect();
    let train_y: Vec<u8> = train_idx.iter().map(|&i| items[i].label).collect();
    let model = logistic_fit(&train_x, &train_y, cfg.regularization)?;

    let scores: Vec<f64> = test_idx
        .iter()
        .map(|&i| model.score(&transform(&items[i].vector)))
        .collect();
    let y_true: Vec<u8> = test_idx.iter().map(|&i| items[i].label).collect();
    let metrics = partial_metrics(&y_true, &scores, cfg.threshold)?;
    let positives = y_true.iter().filter(|&&y| y == 1).count();
    Ok(FoldReport {
        name,
        test_size: test_idx.len(),
        positives,
        negatives: y_true.len() - positives,
        test_ids: test_idx.iter().map(|&i| items[i].graph_id.clone()).collect(),
        metrics,
    })
}
