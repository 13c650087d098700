//! The joint objective: masked-node cross-entropy plus graph-identity
//! cross-entropy.
//!
//! `L_TD` sums the cross-entropy over each sequence's masked positions and
//! averages over sequences; `L_GS` is the mean cross-entropy of the graph
//! prediction from the CLS embedding. Both heads are pure linear maps and
//! the softmax lives inside the loss.

use super::{Heads, MaskedSequence, TrainError};
use crate::encoder::{backward, encode_traced, EncodeTrace, EncoderGrads, EncoderState};
use crate::linalg::{log_sum_exp, Mat};
use crate::rng::stream_rng;
use rayon::prelude::*;

/// Gradients of everything the optimizer updates.
#[derive(Debug, Clone)]
pub struct JointGrads {
    pub encoder: EncoderGrads,
    pub w_td: Mat,
    pub w_gs: Mat,
}

impl JointGrads {
    pub fn zeros(state: &EncoderState, heads: &Heads) -> Self {
        JointGrads {
            encoder: state.zeros_like(),
            w_td: Mat::zeros(heads.w_td.rows(), heads.w_td.cols()),
            w_gs: Mat::zeros(heads.w_gs.rows(), heads.w_gs.cols()),
        }
    }

    pub fn add_assign(&mut self, other: &JointGrads) {
        self.encoder.add_assign(&other.encoder);
        self.w_td.add_assign(&other.w_td);
        self.w_gs.add_assign(&other.w_gs);
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.encoder.tensors();
        out.push(self.w_td.data());
        out.push(self.w_gs.data());
        out
    }
}

/// Batch-mean loss components; the total is `λ1·l_td + λ2·l_gs` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValues {
    pub l_td: f64,
    pub l_gs: f64,
    pub sequences: usize,
}

impl LossValues {
    pub fn total(&self, lambda1: f64, lambda2: f64) -> f64 {
        lambda1 * self.l_td + lambda2 * self.l_gs
    }
}

/// Logits of a row vector against a `d×K` head: `out_k = e · W[:,k]`.
fn head_logits(embedding: &[f64], w: &Mat) -> Vec<f64> {
    let mut logits = vec![0.0; w.cols()];
    for (d_i, &e) in embedding.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        for (l, &wv) in logits.iter_mut().zip(w.row(d_i)) {
            *l += e * wv;
        }
    }
    logits
}

/// Temporal-dynamics loss over a batch of encoded sequences: mean over
/// sequences of the summed masked-position cross-entropy.
pub fn temporal_dynamics_loss(outputs: &[Mat], batch: &[MaskedSequence], w_td: &Mat) -> f64 {
    assert_eq!(outputs.len(), batch.len());
    let mut sum = 0.0;
    for (hidden, seq) in outputs.iter().zip(batch) {
        for &(pos, target) in &seq.masked {
            let logits = head_logits(hidden.row(pos), w_td);
            sum += log_sum_exp(&logits) - logits[target];
        }
    }
    sum / batch.len() as f64
}

/// Graph-identity loss: mean cross-entropy of predicting each sequence's
/// source graph from its CLS embedding.
pub fn graph_level_loss(
    outputs: &[Mat],
    batch: &[MaskedSequence],
    w_gs: &Mat,
) -> Result<f64, TrainError> {
    assert_eq!(outputs.len(), batch.len());
    let mut sum = 0.0;
    for (hidden, seq) in outputs.iter().zip(batch) {
        if seq.graph_index >= w_gs.cols() {
            return Err(TrainError::GraphIndexOutOfRange {
                index: seq.graph_index,
                graphs: w_gs.cols(),
            });
        }
        let logits = head_logits(hidden.row(0), w_gs);
        sum += log_sum_exp(&logits) - logits[seq.graph_index];
    }
    Ok(sum / batch.len() as f64)
}

struct SeqResult {
    trace: EncodeTrace,
    l_td: f64,
    l_gs: f64,
    /// Gradient of the λ-weighted loss w.r.t. the final hidden states,
    /// already scaled by 1/batch.
    d_out: Mat,
    /// Sparse head gradient pieces: (position row, dlogits) pairs.
    td_pieces: Vec<(usize, Vec<f64>)>,
    gs_dlogits: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn forward_one(
    state: &EncoderState,
    heads: &Heads,
    seq: &MaskedSequence,
    lambda1: f64,
    lambda2: f64,
    inv_batch: f64,
    per_position_td: bool,
    dropout: Option<(f64, u64, u64)>,
) -> Result<SeqResult, TrainError> {
    let trace = match dropout {
        Some((rate, stream, idx)) if rate > 0.0 => {
            let mut rng = stream_rng(stream, &[idx]);
            encode_traced(&seq.tokens, state, Some((rate, &mut rng)))?
        }
        _ => encode_traced(&seq.tokens, state, None)?,
    };
    let hidden = &trace.output;
    let dim = hidden.cols();
    let mut d_out = Mat::zeros(hidden.rows(), dim);

    let mut l_td = 0.0;
    let td_scale = if per_position_td && !seq.masked.is_empty() {
        1.0 / seq.masked.len() as f64
    } else {
        1.0
    };
    let mut td_pieces = Vec::with_capacity(seq.masked.len());
    for &(pos, target) in &seq.masked {
        let mut logits = head_logits(hidden.row(pos), &heads.w_td);
        let lse = log_sum_exp(&logits);
        l_td += td_scale * (lse - logits[target]);
        // Convert logits to softmax-minus-onehot in place.
        for l in logits.iter_mut() {
            *l = (*l - lse).exp();
        }
        logits[target] -= 1.0;
        let coeff = lambda1 * inv_batch * td_scale;
        let d_row = d_out.row_mut(pos);
        for (d_i, dr) in d_row.iter_mut().enumerate() {
            *dr += coeff * crate::linalg::dot(&logits, heads.w_td.row(d_i));
        }
        td_pieces.push((pos, logits));
    }

    if seq.graph_index >= heads.w_gs.cols() {
        return Err(TrainError::GraphIndexOutOfRange {
            index: seq.graph_index,
            graphs: heads.w_gs.cols(),
        });
    }
    let mut gs_logits = head_logits(hidden.row(0), &heads.w_gs);
    let lse = log_sum_exp(&gs_logits);
    let l_gs = lse - gs_logits[seq.graph_index];
    for l in gs_logits.iter_mut() {
        *l = (*l - lse).exp();
    }
    gs_logits[seq.graph_index] -= 1.0;
    let coeff = lambda2 * inv_batch;
    let d_row = d_out.row_mut(0);
    for (d_i, dr) in d_row.iter_mut().enumerate() {
        *dr += coeff * crate::linalg::dot(&gs_logits, heads.w_gs.row(d_i));
    }

    Ok(SeqResult {
        trace,
        l_td,
        l_gs,
        d_out,
        td_pieces,
        gs_dlogits: gs_logits,
    })
}

/// Forward-only batch loss.
pub fn batch_loss(
    state: &EncoderState,
    heads: &Heads,
    batch: &[MaskedSequence],
    per_position_td: bool,
) -> Result<LossValues, TrainError> {
    assert!(!batch.is_empty());
    let mut l_td = 0.0;
    let mut l_gs = 0.0;
    for seq in batch {
        let r = forward_one(state, heads, seq, 0.0, 0.0, 0.0, per_position_td, None)?;
        l_td += r.l_td;
        l_gs += r.l_gs;
    }
    Ok(LossValues {
        l_td: l_td / batch.len() as f64,
        l_gs: l_gs / batch.len() as f64,
        sequences: batch.len(),
    })
}

/// Fused forward + backward over one batch. Work is split into at most
/// eight index-contiguous chunks processed in parallel and reduced in chunk
/// order, so the result is identical for any thread count.
pub fn batch_loss_and_grads(
    state: &EncoderState,
    heads: &Heads,
    batch: &[MaskedSequence],
    lambda1: f64,
    lambda2: f64,
    per_position_td: bool,
    dropout: Option<(f64, u64)>,
) -> Result<(LossValues, JointGrads), TrainError> {
    assert!(!batch.is_empty());
    let inv_batch = 1.0 / batch.len() as f64;
    let chunk_len = batch.len().div_ceil(8);

    let chunk_results: Vec<Result<(f64, f64, JointGrads), TrainError>> = batch
        .par_chunks(chunk_len)
        .enumerate()
        .map(|(chunk_idx, chunk)| {
            let mut grads = JointGrads::zeros(state, heads);
            let mut l_td = 0.0;
            let mut l_gs = 0.0;
            for (offset, seq) in chunk.iter().enumerate() {
                let seq_idx = (chunk_idx * chunk_len + offset) as u64;
                let dropout = dropout.map(|(rate, stream)| (rate, stream, seq_idx));
                let r = forward_one(
                    state, heads, seq, lambda1, lambda2, inv_batch, per_position_td, dropout,
                )?;
                l_td += r.l_td;
                l_gs += r.l_gs;
                backward(&r.trace, state, &r.d_out, &mut grads.encoder);
                // Head gradients from the saved softmax-minus-onehot rows.
                let hidden = &r.trace.output;
                let td_scale = if per_position_td && !seq.masked.is_empty() {
                    1.0 / seq.masked.len() as f64
                } else {
                    1.0
                };
                for (pos, dlogits) in &r.td_pieces {
                    accumulate_outer(
                        &mut grads.w_td,
                        hidden.row(*pos),
                        dlogits,
                        lambda1 * inv_batch * td_scale,
                    );
                }
                accumulate_outer(&mut grads.w_gs, hidden.row(0), &r.gs_dlogits, lambda2 * inv_batch);
            }
            Ok((l_td, l_gs, grads))
        })
        .collect();

    let mut total = JointGrads::zeros(state, heads);
    let mut l_td = 0.0;
    let mut l_gs = 0.0;
    for r in chunk_results {
        let (td, gs, grads) = r?;
        l_td += td;
        l_gs += gs;
        total.add_assign(&grads);
    }
    Ok((
        LossValues {
            l_td: l_td * inv_batch,
            l_gs: l_gs * inv_batch,
            sequences: batch.len(),
        },
        total,
    ))
}

/// `w[d][k] += coeff * e[d] * dlogits[k]`.
fn accumulate_outer(w: &mut Mat, embedding: &[f64], dlogits: &[f64], coeff: f64) {
    for (d_i, &e) in embedding.iter().enumerate() {
        let scale = coeff * e;
        if scale == 0.0 {
            continue;
        }
        for (wv, &dl) in w.row_mut(d_i).iter_mut().zip(dlogits) {
            *wv += scale * dl;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encode, EncoderConfig, Vocabulary};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn tiny_setup(graphs: usize) -> (EncoderState, Heads, Vocabulary) {
        let cfg = EncoderConfig {
            dim: 8,
            heads: 2,
            layers: 1,
            d_ff: 12,
            max_seq: 8,
        };
        let vocab = Vocabulary::new(7);
        let state = EncoderState::init(cfg, vocab, &mut stream_rng(11, &[0])).unwrap();
        let heads = Heads::zeros(8, vocab.size(), graphs);
        (state, heads, vocab)
    }

    fn batch_with(vocab: &Vocabulary, graphs: usize) -> Vec<MaskedSequence> {
        let mut rng = stream_rng(12, &[1]);
        (0..3)
            .map(|i| {
                let len = 4 + i % 2;
                let nodes: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab.regions())).collect();
                let mut tokens = vec![vocab.cls()];
                tokens.extend(&nodes);
                tokens.resize(8, vocab.pad());
                let mask_pos = 1 + i % len;
                let masked = vec![(mask_pos, tokens[mask_pos])];
                let mut seq = MaskedSequence {
                    tokens,
                    masked,
                    graph_index: i % graphs,
                };
                seq.tokens[mask_pos] = vocab.mask();
                seq
            })
            .collect()
    }

    #[test]
    fn uniform_logits_give_log_cardinality_losses() {
        let (state, heads, vocab) = tiny_setup(4);
        let batch = batch_with(&vocab, 4);
        let loss = batch_loss(&state, &heads, &batch, false).unwrap();
        // Zero heads mean uniform logits: ln|V| per masked position (one per
        // sequence here) and ln|G| per sequence.
        assert!((loss.l_td - (vocab.size() as f64).ln()).abs() < 1e-12);
        assert!((loss.l_gs - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_graph_corpus_has_zero_graph_loss() {
        let (state, heads, vocab) = tiny_setup(1);
        let batch = batch_with(&vocab, 1);
        let loss = batch_loss(&state, &heads, &batch, false).unwrap();
        assert_eq!(loss.l_gs, 0.0);
    }

    #[test]
    fn confident_heads_drive_losses_toward_zero() {
        let (state, mut heads, vocab) = tiny_setup(2);
        let batch = batch_with(&vocab, 2);
        // Build a TD head whose logits put overwhelming mass on the truth:
        // compute embeddings, then set W columns via outer products.
        let outputs: Vec<Mat> = batch
            .iter()
            .map(|s| encode(&s.tokens, &state).unwrap().hidden)
            .collect();
        for (out, seq) in outputs.iter().zip(&batch) {
            for &(pos, target) in &seq.masked {
                let e = out.row(pos);
                let norm: f64 = e.iter().map(|v| v * v).sum();
                for (d_i, &ev) in e.iter().enumerate() {
                    let w = heads.w_td.get(d_i, target) + 50.0 * ev / norm;
                    heads.w_td.set(d_i, target, w);
                }
            }
        }
        let l_td = temporal_dynamics_loss(&outputs, &batch, &heads.w_td);
        assert!(l_td < 0.05, "loss {l_td} should be near zero");
    }

    #[test]
    fn standalone_ops_agree_with_fused_path() {
        let (state, mut heads, vocab) = tiny_setup(3);
        let mut rng = stream_rng(13, &[2]);
        for v in heads.w_td.data_mut() {
            *v = 0.1 * rng.gen_range(-1.0..1.0);
        }
        for v in heads.w_gs.data_mut() {
            *v = 0.1 * rng.gen_range(-1.0..1.0);
        }
        let batch = batch_with(&vocab, 3);
        let outputs: Vec<Mat> = batch
            .iter()
            .map(|s| encode(&s.tokens, &state).unwrap().hidden)
            .collect();
        let l_td = temporal_dynamics_loss(&outputs, &batch, &heads.w_td);
        let l_gs = graph_level_loss(&outputs, &batch, &heads.w_gs).unwrap();
        let fused = batch_loss(&state, &heads, &batch, false).unwrap();
        assert!((fused.l_td - l_td).abs() < 1e-12);
        assert!((fused.l_gs - l_gs).abs() < 1e-12);
        let (fused2, _) =
            batch_loss_and_grads(&state, &heads, &batch, 1.0, 5.0, false, None).unwrap();
        assert!((fused2.l_td - l_td).abs() < 1e-12);
        assert!((fused2.l_gs - l_gs).abs() < 1e-12);
        assert!((fused2.total(1.0, 5.0) - (l_td + 5.0 * l_gs)).abs() < 1e-12);
    }

    #[test]
    fn per_position_option_averages_masked_terms() {
        let (state, mut heads, vocab) = tiny_setup(2);
        let mut rng = stream_rng(15, &[4]);
        for v in heads.w_td.data_mut() {
            *v = 0.2 * rng.gen_range(-1.0..1.0);
        }
        // Two masks in the first sequence, one in the second.
        let mut batch = batch_with(&vocab, 2);
        let extra_pos = 2;
        let extra_target = batch[0].tokens[extra_pos];
        batch[0].tokens[extra_pos] = vocab.mask();
        batch[0].masked.push((extra_pos, extra_target));
        batch[0].masked.sort_unstable();

        let summed = batch_loss(&state, &heads, &batch, false).unwrap();
        let averaged = batch_loss(&state, &heads, &batch, true).unwrap();
        assert!(averaged.l_td < summed.l_td);
        assert_eq!(summed.l_gs, averaged.l_gs);

        // Gradients stay consistent with the averaged objective.
        let (_, grads) =
            batch_loss_and_grads(&state, &heads, &batch, 1.0, 0.0, true, None).unwrap();
        let eps = 1e-5;
        let mut probe = heads.clone();
        let orig = probe.w_td.get(0, 0);
        probe.w_td.set(0, 0, orig + eps);
        let up = batch_loss(&state, &probe, &batch, true).unwrap().l_td;
        probe.w_td.set(0, 0, orig - eps);
        let down = batch_loss(&state, &probe, &batch, true).unwrap().l_td;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grads.w_td.get(0, 0);
        assert!(
            (numeric - analytic).abs() < 1e-6,
            "numeric {numeric} vs analytic {analytic}"
        );
    }

    #[test]
    fn out_of_range_graph_index_is_reported() {
        let (state, heads, vocab) = tiny_setup(2);
        let mut batch = batch_with(&vocab, 2);
        batch[0].graph_index = 7;
        assert!(matches!(
            batch_loss(&state, &heads, &batch, false),
            Err(TrainError::GraphIndexOutOfRange { index: 7, graphs: 2 })
        ));
    }

    /// Full joint gradient check: every parameter including both heads.
    #[test]
    fn joint_gradients_match_central_differences() {
        let (mut state, mut heads, vocab) = tiny_setup(3);
        let mut rng = stream_rng(14, &[3]);
        for v in heads.w_td.data_mut() {
            *v = 0.3 * rng.gen_range(-1.0..1.0);
        }
        for v in heads.w_gs.data_mut() {
            *v = 0.3 * rng.gen_range(-1.0..1.0);
        }
        let batch = batch_with(&vocab, 3);
        let (lambda1, lambda2) = (1.0, 5.0);

        let (_, grads) =
            batch_loss_and_grads(&state, &heads, &batch, lambda1, lambda2, false, None).unwrap();

        let eps = 1e-4;
        let mut checked = 0usize;
        let n_state = state.tensors().len();
        let total_tensors = n_state + 2;
        for t_idx in 0..total_tensors {
            let len = if t_idx < n_state {
                state.tensors()[t_idx].len()
            } else {
                heads.tensors()[t_idx - n_state].len()
            };
            for i in 0..len {
                let read = |s: &mut EncoderState, h: &mut Heads| -> f64 {
                    if t_idx < n_state {
                        s.tensors()[t_idx][i]
                    } else {
                        h.tensors()[t_idx - n_state][i]
                    }
                };
                let write = |s: &mut EncoderState, h: &mut Heads, v: f64| {
                    if t_idx < n_state {
                        s.tensors_mut()[t_idx][i] = v;
                    } else {
                        h.tensors_mut()[t_idx - n_state][i] = v;
                    }
                };
                let orig = read(&mut state, &mut heads);
                write(&mut state, &mut heads, orig + eps);
                let up = batch_loss(&state, &heads, &batch, false)
                    .unwrap()
                    .total(lambda1, lambda2);
                write(&mut state, &mut heads, orig - eps);
                let down = batch_loss(&state, &heads, &batch, false)
                    .unwrap()
                    .total(lambda1, lambda2);
                write(&mut state, &mut heads, orig);
                let numeric = (up - down) / (2.0 * eps);
                let analytic = grads.tensors()[t_idx][i];
                let abs_err = (analytic - numeric).abs();
                if abs_err > 1e-6 {
                    let rel = abs_err / analytic.abs().max(numeric.abs());
                    assert!(
                        rel < 1e-3,
                        "tensor {t_idx} elem {i}: analytic {analytic} vs numeric {numeric}"
                    );
                }
                checked += 1;
            }
        }
        assert!(checked > 500);
    }
}
