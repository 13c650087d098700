//! Downstream evaluation of graph embeddings.
//!
//! A logistic classifier is fit on the embeddings under stratified k-fold or
//! leave-one-site-out cross-validation; accuracy, sensitivity, specificity,
//! and AUC are reported per fold and aggregated as mean ± std. The positive
//! class is label 1 (cases), so sensitivity is the case detection rate and
//! specificity the control clearance rate.

mod cv;
mod folds;
mod logistic;
mod metrics;

pub use cv::{run_cv, AggregateReport, EvalConfig, EvalReport, FoldReport, MeanStd, Protocol};
pub use folds::stratified_kfold;
pub use logistic::{logistic_fit, LogisticModel};
pub use metrics::{binary_metrics, partial_metrics, Metrics, PartialMetrics};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid eval config: {0}")]
    InvalidConfig(String),
    #[error("class {class} has {count} members; stratified {k}-fold needs at least {k}")]
    InfeasibleStratification { class: u8, count: usize, k: usize },
    #[error("training set contains a single class; logistic fit is degenerate")]
    DegenerateFit,
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("{0}")]
    DataMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One embedded graph with its label and acquisition site.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbedding {
    pub graph_id: String,
    pub vector: Vec<f64>,
    pub label: u8,
    pub site: String,
}

impl LabeledEmbedding {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.label > 1 {
            return Err(EvalError::DataMismatch(format!(
                "label {} of {} is not binary",
                self.label, self.graph_id
            )));
        }
        if self.vector.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::DataMismatch(format!(
                "non-finite embedding for {}",
                self.graph_id
            )));
        }
        Ok(())
    }
}

/// Join embeddings with a phenotype table into labeled items, in embedding
/// order.
pub fn join_with_phenotype(
    graph_ids: &[String],
    embeddings: &crate::linalg::Mat,
    phenotype: &crate::connectome::io::Phenotype,
) -> Result<Vec<LabeledEmbedding>, EvalError> {
    if graph_ids.len() != embeddings.rows() {
        return Err(EvalError::DataMismatch(format!(
            "{} ids vs {} embedding rows",
            graph_ids.len(),
            embeddings.rows()
        )));
    }
    let mut items = Vec::with_capacity(graph_ids.len());
    for (i, id) in graph_ids.iter().enumerate() {
        let record = phenotype.get(id).ok_or_else(|| {
            EvalError::DataMismatch(format!("graph {id} missing from phenotype table"))
        })?;
        let item = LabeledEmbedding {
            graph_id: id.clone(),
            vector: embeddings.row(i).to_vec(),
            label: record.label,
            site: record.site.clone(),
        };
        item.validate()?;
        items.push(item);
    }
    Ok(items)
}
