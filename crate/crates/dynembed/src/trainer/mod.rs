//! Joint training of the encoder with two linear heads.
//!
//! The temporal-dynamics head predicts masked node tokens from their
//! contextual embeddings; the graph head predicts which dynamic graph a walk
//! was sampled from, reading the CLS embedding. The total objective is
//! `λ1·L_TD + λ2·L_GS`, minimized with Adam. After training, column `i` of
//! the graph head *is* the embedding of graph `i` — the representation is
//! transductive, defined only for graphs present in the walk corpus.

mod adam;
mod checkpoint;
mod loss;
mod masking;
mod train;

pub mod embeddings;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use loss::{
    batch_loss, batch_loss_and_grads, graph_level_loss, temporal_dynamics_loss, JointGrads,
    LossValues,
};
pub use masking::{make_masked_batch, MaskPolicy, MaskedSequence};
pub use train::{read_loss_trace, train, write_loss_trace, EpochLoss, TrainOutput};

use crate::encoder::EncoderError;
use crate::linalg::Mat;
use crate::tempwalk::{TemporalWalk, WalkError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("corpus mismatch: {0}")]
    CorpusMismatch(String),
    #[error("graph index {index} out of range ({graphs} graphs)")]
    GraphIndexOutOfRange { index: usize, graphs: usize },
    #[error("unknown graph id {0}")]
    UnknownGraphId(String),
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} \
         (L_TD {l_td}, L_GS {l_gs}, max |param| {max_param:.3e})"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        l_td: f64,
        l_gs: f64,
        max_param: f64,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The two classifier heads. `w_td` is `d×|V|`, `w_gs` is `d×|𝒢|`; neither
/// carries a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Heads {
    pub w_td: Mat,
    pub w_gs: Mat,
}

impl Heads {
    /// Zero initialization: both heads start at uniform logits, so the
    /// initial losses are exactly `ln|V|` per masked position and `ln|𝒢|`
    /// per sequence.
    pub fn zeros(dim: usize, vocab_size: usize, graphs: usize) -> Self {
        Heads {
            w_td: Mat::zeros(dim, vocab_size),
            w_gs: Mat::zeros(dim, graphs),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w_td.data(), self.w_gs.data()]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w_td.data_mut(), self.w_gs.data_mut()]
    }
}

/// Masking and optimization hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub mask_fraction: f64,
    pub mask_policy: MaskPolicy,
    pub dropout: f64,
    /// Average the masked-token loss over a sequence's masked positions
    /// instead of summing them. Off by default: the sum-within-walk,
    /// mean-over-walks form is the reference objective.
    pub per_position_td: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 1.0,
            lambda2: 5.0,
            batch_size: 32,
            epochs: 50,
            learning_rate: 1e-4,
            seed: 0,
            mask_fraction: 0.15,
            mask_policy: MaskPolicy::default(),
            dropout: 0.0,
            per_position_td: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(TrainError::InvalidConfig("lambdas must be >= 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(TrainError::InvalidConfig(
                "batch_size and epochs must be >= 1".into(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig("learning rate must be > 0".into()));
        }
        if !(self.mask_fraction > 0.0 && self.mask_fraction <= 1.0) {
            return Err(TrainError::InvalidConfig(
                "mask fraction must lie in (0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        self.mask_policy.validate().map_err(TrainError::InvalidConfig)
    }
}

/// Walks plus the graph-index mapping the graph head trains against.
/// Graph ids are ordered by first appearance in the walks file.
#[derive(Debug, Clone)]
pub struct WalkCorpus {
    pub walks: Vec<TemporalWalk>,
    pub graph_ids: Vec<String>,
    pub graph_of: Vec<usize>,
}

impl WalkCorpus {
    pub fn from_walks(walks: Vec<TemporalWalk>) -> Self {
        let mut graph_ids: Vec<String> = Vec::new();
        let mut graph_of = Vec::with_capacity(walks.len());
        for walk in &walks {
            let idx = match graph_ids.iter().position(|g| g == &walk.graph_id) {
                Some(idx) => idx,
                None => {
                    graph_ids.push(walk.graph_id.clone());
                    graph_ids.len() - 1
                }
            };
            graph_of.push(idx);
        }
        WalkCorpus {
            walks,
            graph_ids,
            graph_of,
        }
    }

    pub fn graph_count(&self) -> usize {
        self.graph_ids.len()
    }

    /// Longest walk (node count) in the corpus.
    pub fn max_walk_len(&self) -> usize {
        self.walks.iter().map(|w| w.nodes.len()).max().unwrap_or(0)
    }

    /// Largest node index seen plus one; a lower bound on R.
    pub fn min_regions(&self) -> usize {
        self.walks
            .iter()
            .flat_map(|w| w.nodes.iter())
            .map(|&n| n as usize + 1)
            .max()
            .unwrap_or(0)
    }
}

/// Embedding matrix (`|𝒢| × d`): row `i` is column `i` of the graph head,
/// with no post-processing.
pub fn extract_embeddings(heads: &Heads, graph_ids: &[String]) -> Result<Mat, TrainError> {
    if graph_ids.len() != heads.w_gs.cols() {
        return Err(TrainError::CorpusMismatch(format!(
            "{} graph ids vs {} head columns",
            graph_ids.len(),
            heads.w_gs.cols()
        )));
    }
    let d = heads.w_gs.rows();
    let mut out = Mat::zeros(graph_ids.len(), d);
    for g in 0..graph_ids.len() {
        for j in 0..d {
            out.set(g, j, heads.w_gs.get(j, g));
        }
    }
    Ok(out)
}

/// Embedding of a single graph id, if present.
pub fn embedding_of(
    heads: &Heads,
    graph_ids: &[String],
    graph_id: &str,
) -> Result<Vec<f64>, TrainError> {
    let idx = graph_ids
        .iter()
        .position(|g| g == graph_id)
        .ok_or_else(|| TrainError::UnknownGraphId(graph_id.to_string()))?;
    Ok((0..heads.w_gs.rows()).map(|j| heads.w_gs.get(j, idx)).collect())
}
