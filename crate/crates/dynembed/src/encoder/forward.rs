//! Encoder forward pass, with an optional trace for backpropagation.

use super::{positional_encoding, EncoderError, EncoderState, LayerParams, LN_EPS};
use crate::linalg::{softmax_masked_inplace, Mat};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Per-position embeddings; row 0 is the CLS aggregate.
#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub hidden: Mat,
}

impl EncodeOutput {
    pub fn cls(&self) -> &[f64] {
        self.hidden.row(0)
    }
}

/// Layer-norm intermediates needed by the backward pass.
#[derive(Debug, Clone)]
pub struct LnTrace {
    pub xhat: Mat,
    pub inv_std: Vec<f64>,
}

/// Everything the backward pass needs from one layer's forward.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub x_in: Mat,
    pub q: Mat,
    pub k: Mat,
    pub v: Mat,
    /// Post-softmax attention weights, one `n×n` matrix per head.
    pub attn: Vec<Mat>,
    /// Concatenated head outputs before the output projection.
    pub ctx: Mat,
    pub r1: Mat,
    pub ln1: LnTrace,
    pub h1: Mat,
    pub ffn_pre: Mat,
    pub ffn_act: Mat,
    pub r2: Mat,
    pub ln2: LnTrace,
    /// Inverted-dropout masks (entries 0 or 1/(1-p)) when dropout is active.
    pub drop_attn: Option<Mat>,
    pub drop_ffn: Option<Mat>,
}

#[derive(Debug, Clone)]
pub struct EncodeTrace {
    pub tokens: Vec<usize>,
    /// Number of non-PAD positions; keys at and beyond this index are masked.
    pub valid: usize,
    pub layers: Vec<LayerTrace>,
    pub output: Mat,
}

/// Scaled dot-product attention weights `softmax(QKᵀ/√d_k)` with key
/// positions `>= valid` masked out. Row-wise max-subtraction keeps the
/// softmax stable.
pub fn attention_weights(q: &Mat, k: &Mat, valid: usize) -> Mat {
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let mut scores = q.matmul_transb(k);
    scores.scale(scale);
    for i in 0..scores.rows() {
        softmax_masked_inplace(scores.row_mut(i), valid);
    }
    scores
}

/// Single-head attention: `softmax(QKᵀ/√d_k)·V`.
pub fn attention(q: &Mat, k: &Mat, v: &Mat, valid: usize) -> Mat {
    attention_weights(q, k, valid).matmul(v)
}

/// Multi-head attention over an already-embedded sequence `x` (`n×d`):
/// per-head projections, scaled dot-product attention, concatenation, and
/// the output projection.
pub fn multi_head(x: &Mat, layer: &LayerParams, heads: usize, valid: usize) -> Mat {
    let d = x.cols();
    let dk = d / heads;
    let q = x.matmul(&layer.wq);
    let k = x.matmul(&layer.wk);
    let v = x.matmul(&layer.wv);
    let mut ctx = Mat::zeros(x.rows(), d);
    for h in 0..heads {
        let (c0, c1) = (h * dk, (h + 1) * dk);
        let head = attention(&q.cols_copy(c0, c1), &k.cols_copy(c0, c1), &v.cols_copy(c0, c1), valid);
        ctx.add_cols(c0, &head);
    }
    ctx.matmul(&layer.wo)
}

fn layer_norm(x: &Mat, gain: &[f64], bias: &[f64]) -> (Mat, LnTrace) {
    let (n, d) = (x.rows(), x.cols());
    let mut out = Mat::zeros(n, d);
    let mut xhat = Mat::zeros(n, d);
    let mut inv_std = vec![0.0; n];
    for (i, istd_slot) in inv_std.iter_mut().enumerate() {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let istd = 1.0 / (var + LN_EPS).sqrt();
        *istd_slot = istd;
        let xhat_row = xhat.row_mut(i);
        for (slot, &v) in xhat_row.iter_mut().zip(row) {
            *slot = (v - mean) * istd;
        }
        let out_row = out.row_mut(i);
        for ((slot, xh), (g, b)) in out_row.iter_mut().zip(xhat.row(i)).zip(gain.iter().zip(bias)) {
            *slot = xh * g + b;
        }
    }
    (out, LnTrace { xhat, inv_std })
}

fn add_bias(x: &mut Mat, bias: &[f64]) {
    for i in 0..x.rows() {
        for (v, b) in x.row_mut(i).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Position-wise feed-forward: `max(0, x·W1 + b1)·W2 + b2`. Returns the
/// pre-activation and activation too, which the backward pass needs.
pub fn ffn(x: &Mat, layer: &LayerParams) -> (Mat, Mat, Mat) {
    let mut pre = x.matmul(&layer.w1);
    add_bias(&mut pre, &layer.b1);
    let mut act = pre.clone();
    for v in act.data_mut() {
        *v = v.max(0.0);
    }
    let mut out = act.matmul(&layer.w2);
    add_bias(&mut out, &layer.b2);
    (pre, act, out)
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha8Rng) -> Mat {
    let keep = 1.0 - rate;
    let data = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    Mat::from_vec(rows, cols, data)
}

fn apply_mask(x: &mut Mat, mask: &Mat) {
    for (v, m) in x.data_mut().iter_mut().zip(mask.data()) {
        *v *= m;
    }
}

fn validate_tokens(tokens: &[usize], state: &EncoderState) -> Result<usize, EncoderError> {
    let vocab = &state.vocab;
    if tokens.len() > state.config.max_seq {
        return Err(EncoderError::SequenceTooLong {
            len: tokens.len(),
            max_seq: state.config.max_seq,
        });
    }
    if tokens.len() < 2 {
        return Err(EncoderError::InvalidConfig(
            "sequence needs CLS plus at least one token".into(),
        ));
    }
    for &t in tokens {
        vocab.check(t)?;
    }
    if tokens[0] != vocab.cls() {
        return Err(EncoderError::MissingCls);
    }
    let valid = tokens
        .iter()
        .position(|&t| t == vocab.pad())
        .unwrap_or(tokens.len());
    if tokens[valid..].iter().any(|&t| t != vocab.pad()) {
        return Err(EncoderError::InvalidPadding);
    }
    if valid < 2 {
        return Err(EncoderError::InvalidPadding);
    }
    Ok(valid)
}

/// Full traced forward pass. `dropout` is `(rate, rng)` during training;
/// inference passes `None` and is rng-free.
pub fn encode_traced(
    tokens: &[usize],
    state: &EncoderState,
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<EncodeTrace, EncoderError> {
    let valid = validate_tokens(tokens, state)?;
    let cfg = &state.config;
    let (n, d) = (tokens.len(), cfg.dim);
    let dk = cfg.head_dim();

    let mut x = Mat::zeros(n, d);
    for (pos, &tok) in tokens.iter().enumerate() {
        let pe = positional_encoding(pos, d);
        let row = x.row_mut(pos);
        for (j, (e, p)) in state.embedding.row(tok).iter().zip(pe).enumerate() {
            row[j] = e + p;
        }
    }

    let mut layers = Vec::with_capacity(cfg.layers);
    for layer in &state.layers {
        let q = x.matmul(&layer.wq);
        let k = x.matmul(&layer.wk);
        let v = x.matmul(&layer.wv);
        let mut attn = Vec::with_capacity(cfg.heads);
        let mut ctx = Mat::zeros(n, d);
        for h in 0..cfg.heads {
            let (c0, c1) = (h * dk, (h + 1) * dk);
            let weights = attention_weights(&q.cols_copy(c0, c1), &k.cols_copy(c0, c1), valid);
            let head = weights.matmul(&v.cols_copy(c0, c1));
            ctx.add_cols(c0, &head);
            attn.push(weights);
        }
        let mut attn_out = ctx.matmul(&layer.wo);
        let drop_attn = match &mut dropout {
            Some((rate, rng)) if *rate > 0.0 => {
                let mask = dropout_mask(n, d, *rate, rng);
                apply_mask(&mut attn_out, &mask);
                Some(mask)
            }
            _ => None,
        };

        let mut r1 = x.clone();
        r1.add_assign(&attn_out);
        let (h1, ln1) = layer_norm(&r1, &layer.ln1_gain, &layer.ln1_bias);

        let (ffn_pre, ffn_act, mut ffn_out) = ffn(&h1, layer);
        let drop_ffn = match &mut dropout {
            Some((rate, rng)) if *rate > 0.0 => {
                let mask = dropout_mask(n, d, *rate, rng);
                apply_mask(&mut ffn_out, &mask);
                Some(mask)
            }
            _ => None,
        };

        let mut r2 = h1.clone();
        r2.add_assign(&ffn_out);
        let (next, ln2) = layer_norm(&r2, &layer.ln2_gain, &layer.ln2_bias);

        layers.push(LayerTrace {
            x_in: x,
            q,
            k,
            v,
            attn,
            ctx,
            r1,
            ln1,
            h1,
            ffn_pre,
            ffn_act,
            r2,
            ln2,
            drop_attn,
            drop_ffn,
        });
        x = next;
    }

    Ok(EncodeTrace {
        tokens: tokens.to_vec(),
        valid,
        layers,
        output: x,
    })
}

/// Deterministic inference forward pass; returns all positions, row 0 being
/// the CLS embedding.
pub fn encode(tokens: &[usize], state: &EncoderState) -> Result<EncodeOutput, EncoderError> {
    let trace = encode_traced(tokens, state, None)?;
    Ok(EncodeOutput { hidden: trace.output })
}
