//! From-scratch Transformer encoder over tokenized walk sequences.
//!
//! Sequence layout: position 0 is the CLS token, node tokens follow, and PAD
//! fills the tail. Attention masks PAD keys, so padded positions receive
//! zero attention mass from live positions and never influence them. Both
//! the forward pass and backpropagation are implemented here; there is no
//! autograd dependency.
//!
//! Blocks use post-sublayer normalization: `x → LN(x + MultiHead(x)) →
//! LN(· + FFN(·))`. Positional encodings are the sinusoidal family.

mod backward;
mod forward;

pub use backward::backward;
pub use forward::{
    attention, attention_weights, encode, encode_traced, ffn, multi_head, EncodeOutput,
    EncodeTrace,
};

use crate::linalg::Mat;
use crate::rng::standard_normal;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) const LN_EPS: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("unknown token id {token} (vocabulary size {vocab_size})")]
    UnknownToken { token: usize, vocab_size: usize },
    #[error("sequence of length {len} exceeds max_seq {max_seq}")]
    SequenceTooLong { len: usize, max_seq: usize },
    #[error("sequence must start with CLS")]
    MissingCls,
    #[error("PAD tokens must form a suffix")]
    InvalidPadding,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Token ids: node tokens `0..R-1`, then CLS, MASK, PAD. All graphs share
/// the node vocabulary, so ids are dense and stable across a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    regions: usize,
}

impl Vocabulary {
    pub fn new(regions: usize) -> Self {
        Vocabulary { regions }
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn size(&self) -> usize {
        self.regions + 3
    }

    pub fn cls(&self) -> usize {
        self.regions
    }

    pub fn mask(&self) -> usize {
        self.regions + 1
    }

    pub fn pad(&self) -> usize {
        self.regions + 2
    }

    pub fn is_node(&self, token: usize) -> bool {
        token < self.regions
    }

    pub fn check(&self, token: usize) -> Result<(), EncoderError> {
        if token < self.size() {
            Ok(())
        } else {
            Err(EncoderError::UnknownToken {
                token,
                vocab_size: self.size(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Embedding dimension `d`.
    pub dim: usize,
    /// Attention heads `h`; `d` must divide evenly.
    pub heads: usize,
    /// Encoder layers.
    pub layers: usize,
    /// Feed-forward width; conventionally `4·d`.
    pub d_ff: usize,
    /// Maximum sequence length including CLS (`l_max + 1`).
    pub max_seq: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 252,
            heads: 4,
            layers: 6,
            d_ff: 4 * 252,
            max_seq: 21,
        }
    }
}

impl EncoderConfig {
    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.dim == 0 || self.heads == 0 || self.layers == 0 || self.d_ff == 0 {
            return Err(EncoderError::InvalidConfig(
                "dim, heads, layers, and d_ff must be positive".into(),
            ));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(EncoderError::InvalidConfig(format!(
                "dim {} not divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if self.max_seq < 2 {
            return Err(EncoderError::InvalidConfig(
                "max_seq must be at least 2 (CLS plus one token)".into(),
            ));
        }
        Ok(())
    }
}

/// Sinusoidal positional encoding row for `pos`.
pub fn positional_encoding(pos: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            let pair = (j / 2) as f64;
            let angle = pos as f64 / 10_000f64.powf(2.0 * pair / dim as f64);
            if j % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Learnable tensors of one encoder layer. The per-head projection matrices
/// live side by side in column blocks of `wq`/`wk`/`wv` (head `i` owns
/// columns `i·d_k .. (i+1)·d_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
    pub ln1_gain: Vec<f64>,
    pub ln1_bias: Vec<f64>,
    pub ln2_gain: Vec<f64>,
    pub ln2_bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(cfg: &EncoderConfig) -> Self {
        let d = cfg.dim;
        LayerParams {
            wq: Mat::zeros(d, d),
            wk: Mat::zeros(d, d),
            wv: Mat::zeros(d, d),
            wo: Mat::zeros(d, d),
            w1: Mat::zeros(d, cfg.d_ff),
            b1: vec![0.0; cfg.d_ff],
            w2: Mat::zeros(cfg.d_ff, d),
            b2: vec![0.0; d],
            ln1_gain: vec![0.0; d],
            ln1_bias: vec![0.0; d],
            ln2_gain: vec![0.0; d],
            ln2_bias: vec![0.0; d],
        }
    }

    fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        Mat::from_vec(rows, cols, data)
    }

    pub fn init(cfg: &EncoderConfig, rng: &mut ChaCha8Rng) -> Self {
        let d = cfg.dim;
        LayerParams {
            wq: Self::glorot(d, d, rng),
            wk: Self::glorot(d, d, rng),
            wv: Self::glorot(d, d, rng),
            wo: Self::glorot(d, d, rng),
            w1: Self::glorot(d, cfg.d_ff, rng),
            b1: vec![0.0; cfg.d_ff],
            w2: Self::glorot(cfg.d_ff, d, rng),
            b2: vec![0.0; d],
            ln1_gain: vec![1.0; d],
            ln1_bias: vec![0.0; d],
            ln2_gain: vec![1.0; d],
            ln2_bias: vec![0.0; d],
        }
    }

    /// Tensor views in canonical order (matches `tensors_mut`).
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.wq.data(),
            self.wk.data(),
            self.wv.data(),
            self.wo.data(),
            self.w1.data(),
            &self.b1,
            self.w2.data(),
            &self.b2,
            &self.ln1_gain,
            &self.ln1_bias,
            &self.ln2_gain,
            &self.ln2_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.wq.data_mut(),
            self.wk.data_mut(),
            self.wv.data_mut(),
            self.wo.data_mut(),
            self.w1.data_mut(),
            &mut self.b1,
            self.w2.data_mut(),
            &mut self.b2,
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
        ]
    }
}

/// All learnable tensors of the encoder (heads excluded; those belong to the
/// trainer).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub config: EncoderConfig,
    pub vocab: Vocabulary,
    pub embedding: Mat,
    pub layers: Vec<LayerParams>,
}

impl EncoderState {
    /// Fresh parameters: scaled-uniform weight matrices, zero biases, unit
    /// normalization gains, and a normal(0, 0.02) token table.
    pub fn init(config: EncoderConfig, vocab: Vocabulary, rng: &mut ChaCha8Rng) -> Result<Self, EncoderError> {
        config.validate()?;
        let mut embedding = Mat::zeros(vocab.size(), config.dim);
        for v in embedding.data_mut() {
            *v = 0.02 * standard_normal(rng);
        }
        let layers = (0..config.layers)
            .map(|_| LayerParams::init(&config, rng))
            .collect();
        Ok(EncoderState {
            config,
            vocab,
            embedding,
            layers,
        })
    }

    pub fn zeros_like(&self) -> EncoderGrads {
        EncoderGrads {
            embedding: Mat::zeros(self.vocab.size(), self.config.dim),
            layers: (0..self.config.layers)
                .map(|_| LayerParams::zeros(&self.config))
                .collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.data()];
        for layer in &self.layers {
            out.extend(layer.tensors());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embedding.data_mut()];
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Gradient accumulator shaped like [`EncoderState`].
#[derive(Debug, Clone)]
pub struct EncoderGrads {
    pub embedding: Mat,
    pub layers: Vec<LayerParams>,
}

impl EncoderGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.data()];
        for layer in &self.layers {
            out.extend(layer.tensors());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embedding.data_mut()];
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out
    }

    pub fn add_assign(&mut self, other: &EncoderGrads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn positional_encoding_basics() {
        let pe0 = positional_encoding(0, 8);
        for (j, v) in pe0.iter().enumerate() {
            if j % 2 == 0 {
                assert_eq!(*v, 0.0);
            } else {
                assert_eq!(*v, 1.0);
            }
        }
        for pos in [1usize, 3, 17, 10_000] {
            let pe = positional_encoding(pos, 16);
            assert!((pe[0] - (pos as f64).sin()).abs() < 1e-12);
            assert!(pe.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn config_validation() {
        let cfg = EncoderConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.head_dim(), 63);
        let bad = EncoderConfig { dim: 10, heads: 4, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn vocabulary_layout() {
        let vocab = Vocabulary::new(116);
        assert_eq!(vocab.size(), 119);
        assert_eq!(vocab.cls(), 116);
        assert_eq!(vocab.mask(), 117);
        assert_eq!(vocab.pad(), 118);
        assert!(vocab.is_node(115));
        assert!(!vocab.is_node(116));
        assert!(vocab.check(118).is_ok());
        assert!(vocab.check(119).is_err());
    }

    #[test]
    fn init_is_seeded_and_finite() {
        let cfg = EncoderConfig { dim: 8, heads: 2, layers: 2, d_ff: 16, max_seq: 6 };
        let vocab = Vocabulary::new(5);
        let a = EncoderState::init(cfg, vocab, &mut stream_rng(1, &[0])).unwrap();
        let b = EncoderState::init(cfg, vocab, &mut stream_rng(1, &[0])).unwrap();
        assert_eq!(a, b);
        assert!(a.all_finite());
        assert_eq!(
            a.param_count(),
            8 * 8 + 2 * (4 * 64 + 8 * 16 + 16 + 16 * 8 + 8 + 4 * 8)
        );
    }
}
