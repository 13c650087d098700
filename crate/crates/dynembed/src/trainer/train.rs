//! The optimization loop.

use super::{
    batch_loss, batch_loss_and_grads, make_masked_batch, Adam, Heads, TrainConfig, TrainError,
    WalkCorpus,
};
use crate::encoder::{EncoderConfig, EncoderState, Vocabulary};
use crate::rng::{hash_str, stream_rng};
use rand::seq::SliceRandom;
use serde::Serialize;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// One loss-trace row. Epoch 0 is the pre-training evaluation over the full
/// corpus; later rows average the batches of that epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub l_td: f64,
    pub l_gs: f64,
    pub l_total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub state: EncoderState,
    pub heads: Heads,
    pub trace: Vec<EpochLoss>,
    pub graph_ids: Vec<String>,
}

/// Train encoder and heads on a walk corpus.
///
/// Batches mix graphs (shuffled each epoch) so the graph head sees
/// contrastive signal within a batch. Deterministic given the seed: epoch
/// shuffles, masking, and dropout each draw from their own derived streams.
pub fn train(
    corpus: &WalkCorpus,
    regions: usize,
    enc_cfg: &EncoderConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    enc_cfg.validate()?;
    if corpus.walks.is_empty() {
        return Err(TrainError::CorpusMismatch("no walks to train on".into()));
    }
    if corpus.min_regions() > regions {
        return Err(TrainError::CorpusMismatch(format!(
            "walks reference node {} but the vocabulary has {} regions",
            corpus.min_regions() - 1,
            regions
        )));
    }
    if corpus.max_walk_len() + 1 > enc_cfg.max_seq {
        return Err(TrainError::CorpusMismatch(format!(
            "longest walk has {} nodes; encoder max_seq {} cannot hold it with CLS",
            corpus.max_walk_len(),
            enc_cfg.max_seq
        )));
    }
    if corpus.graph_count() == 1 {
        eprintln!(
            "[train] warning: a single-graph corpus makes the graph-identity loss \
             identically zero; its head carries no contrastive signal"
        );
    }
    let vocab = Vocabulary::new(regions);
    let mut state = EncoderState::init(*enc_cfg, vocab, &mut stream_rng(cfg.seed, &[hash_str("init")]))?;
    let mut heads = Heads::zeros(enc_cfg.dim, vocab.size(), corpus.graph_count());
    let mut adam = Adam::new(cfg.learning_rate);

    let all_indices: Vec<usize> = (0..corpus.walks.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs + 1);

    // Epoch 0: pre-training loss over the full corpus with epoch-0 masking.
    {
        let mut sums = (0.0, 0.0, 0usize);
        for (batch_idx, chunk) in all_indices.chunks(cfg.batch_size).enumerate() {
            let mut mask_rng = stream_rng(cfg.seed, &[hash_str("mask"), 0, batch_idx as u64]);
            let batch = make_masked_batch(
                corpus,
                chunk,
                &vocab,
                enc_cfg.max_seq,
                cfg.mask_fraction,
                &cfg.mask_policy,
                &mut mask_rng,
            );
            let loss = batch_loss(&state, &heads, &batch, cfg.per_position_td)?;
            sums.0 += loss.l_td * loss.sequences as f64;
            sums.1 += loss.l_gs * loss.sequences as f64;
            sums.2 += loss.sequences;
        }
        let l_td = sums.0 / sums.2 as f64;
        let l_gs = sums.1 / sums.2 as f64;
        trace.push(EpochLoss {
            epoch: 0,
            l_td,
            l_gs,
            l_total: cfg.lambda1 * l_td + cfg.lambda2 * l_gs,
        });
    }

    for epoch in 1..=cfg.epochs {
        let mut indices = all_indices.clone();
        indices.shuffle(&mut stream_rng(cfg.seed, &[hash_str("shuffle"), epoch as u64]));
        let mut sums = (0.0, 0.0, 0usize);
        for (batch_idx, chunk) in indices.chunks(cfg.batch_size).enumerate() {
            let mut mask_rng =
                stream_rng(cfg.seed, &[hash_str("mask"), epoch as u64, batch_idx as u64]);
            let batch = make_masked_batch(
                corpus,
                chunk,
                &vocab,
                enc_cfg.max_seq,
                cfg.mask_fraction,
                &cfg.mask_policy,
                &mut mask_rng,
            );
            let dropout = if cfg.dropout > 0.0 {
                let stream = crate::rng::stream_seed(
                    cfg.seed,
                    &[hash_str("dropout"), epoch as u64, batch_idx as u64],
                );
                Some((cfg.dropout, stream))
            } else {
                None
            };
            let (loss, grads) = batch_loss_and_grads(
                &state,
                &heads,
                &batch,
                cfg.lambda1,
                cfg.lambda2,
                cfg.per_position_td,
                dropout,
            )?;
            if !loss.l_td.is_finite() || !loss.l_gs.is_finite() {
                let max_param = state
                    .tensors()
                    .iter()
                    .chain(heads.tensors().iter())
                    .flat_map(|t| t.iter())
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    l_td: loss.l_td,
                    l_gs: loss.l_gs,
                    max_param,
                });
            }
            let grad_tensors = grads.tensors();
            let mut params = state.tensors_mut();
            params.extend(heads.tensors_mut());
            adam.step(&mut params, &grad_tensors);
            sums.0 += loss.l_td * loss.sequences as f64;
            sums.1 += loss.l_gs * loss.sequences as f64;
            sums.2 += loss.sequences;
        }
        let l_td = sums.0 / sums.2 as f64;
        let l_gs = sums.1 / sums.2 as f64;
        trace.push(EpochLoss {
            epoch,
            l_td,
            l_gs,
            l_total: cfg.lambda1 * l_td + cfg.lambda2 * l_gs,
        });
    }

    Ok(TrainOutput {
        state,
        heads,
        trace,
        graph_ids: corpus.graph_ids.clone(),
    })
}

/// Loss trace CSV: `epoch,L_TD,L_GS,L_total`.
pub fn write_loss_trace(path: &Path, trace: &[EpochLoss]) -> Result<(), TrainError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "epoch,L_TD,L_GS,L_total")?;
    for row in trace {
        writeln!(out, "{},{},{},{}", row.epoch, row.l_td, row.l_gs, row.l_total)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_loss_trace(path: &Path) -> Result<Vec<EpochLoss>, TrainError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        let parse_err = || TrainError::Checkpoint(format!("bad loss-trace line {}", idx + 1));
        if fields.len() != 4 {
            return Err(parse_err());
        }
        rows.push(EpochLoss {
            epoch: fields[0].parse().map_err(|_| parse_err())?,
            l_td: fields[1].parse().map_err(|_| parse_err())?,
            l_gs: fields[2].parse().map_err(|_| parse_err())?,
            l_total: fields[3].parse().map_err(|_| parse_err())?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::TemporalEdge;
    use crate::connectome::DynamicGraph;
    use crate::rng::stream_rng;
    use crate::tempwalk::{sample_corpus, WalkConfig};
    use rand::Rng;

    fn toy_corpus(graphs: usize, nodes: usize, seed: u64) -> WalkCorpus {
        let graphs: Vec<DynamicGraph> = (0..graphs)
            .map(|g| {
                let mut rng = stream_rng(seed, &[g as u64]);
                let mut edges = Vec::new();
                for t in 0..3u32 {
                    for u in 0..nodes as u32 {
                        for v in (u + 1)..nodes as u32 {
                            if rng.gen::<f64>() < 0.4 {
                                edges.push(TemporalEdge { u, v, t });
                            }
                        }
                    }
                }
                DynamicGraph::new(format!("g{g}"), nodes, 3, edges).unwrap()
            })
            .collect();
        let cfg = WalkConfig {
            l_max: 8,
            walks_per_node: 4,
            seed,
            ..WalkConfig::default()
        };
        let (walks, _) = sample_corpus(&graphs, &cfg).unwrap();
        WalkCorpus::from_walks(walks)
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let corpus = toy_corpus(3, 8, 5);
        let enc_cfg = EncoderConfig {
            dim: 16,
            heads: 2,
            layers: 1,
            d_ff: 32,
            max_seq: 9,
        };
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 16,
            learning_rate: 3e-3,
            seed: 77,
            ..TrainConfig::default()
        };
        let a = train(&corpus, 8, &enc_cfg, &cfg).unwrap();
        let b = train(&corpus, 8, &enc_cfg, &cfg).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.heads, b.heads);
        assert_eq!(a.trace, b.trace);
        let first = a.trace.first().unwrap().l_total;
        let last = a.trace.last().unwrap().l_total;
        assert!(last < first, "loss should fall: {first} -> {last}");
        // Reported totals satisfy the exact linear combination.
        for row in &a.trace {
            assert_eq!(row.l_total, cfg.lambda1 * row.l_td + cfg.lambda2 * row.l_gs);
        }
        // Initial losses sit at the uniform-logit values.
        let vocab_size = 8 + 3;
        assert!((a.trace[0].l_gs - 3.0f64.ln()).abs() < 1e-9);
        assert!(a.trace[0].l_td / (vocab_size as f64).ln() > 0.9);
    }

    #[test]
    fn lambda1_zero_trains_only_the_graph_objective() {
        let corpus = toy_corpus(2, 6, 9);
        let enc_cfg = EncoderConfig {
            dim: 8,
            heads: 2,
            layers: 1,
            d_ff: 16,
            max_seq: 9,
        };
        let cfg = TrainConfig {
            lambda1: 0.0,
            epochs: 3,
            batch_size: 8,
            learning_rate: 3e-3,
            seed: 3,
            ..TrainConfig::default()
        };
        let out = train(&corpus, 6, &enc_cfg, &cfg).unwrap();
        // W_TD receives no gradient when lambda1 = 0.
        assert!(out.heads.w_td.data().iter().all(|&v| v == 0.0));
        assert!(out.heads.w_gs.data().iter().any(|&v| v != 0.0));
        for row in &out.trace {
            assert_eq!(row.l_total, 5.0 * row.l_gs);
        }
    }

    #[test]
    fn corpus_mismatches_are_rejected() {
        let corpus = toy_corpus(2, 8, 4);
        let enc_cfg = EncoderConfig {
            dim: 8,
            heads: 2,
            layers: 1,
            d_ff: 16,
            max_seq: 9,
        };
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&corpus, 4, &enc_cfg, &cfg),
            Err(TrainError::CorpusMismatch(_))
        ));
        let small_seq = EncoderConfig { max_seq: 4, ..enc_cfg };
        assert!(matches!(
            train(&corpus, 8, &small_seq, &cfg),
            Err(TrainError::CorpusMismatch(_))
        ));
    }

    #[test]
    fn exploding_learning_rate_aborts_with_diagnostics() {
        let corpus = toy_corpus(2, 6, 9);
        let enc_cfg = EncoderConfig {
            dim: 8,
            heads: 2,
            layers: 1,
            d_ff: 16,
            max_seq: 9,
        };
        // Layer norm keeps activations finite under almost any blow-up, so
        // forcing a non-finite loss needs steps big enough to overflow f64
        // in the projection products.
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            learning_rate: 1e200,
            seed: 3,
            ..TrainConfig::default()
        };
        match train(&corpus, 6, &enc_cfg, &cfg) {
            Err(TrainError::NonFiniteLoss { epoch, max_param, .. }) => {
                assert!(epoch >= 1);
                // The runaway steps land in the head tensors first (the
                // encoder sees zero gradient through zero-initialized
                // heads), so the diagnostic must reflect their scale.
                assert!(max_param > 1e100, "max_param {max_param:e}");
            }
            other => panic!("expected a non-finite-loss abort, got {other:?}"),
        }
    }

    #[test]
    fn loss_trace_roundtrip() {
        let rows = vec![
            EpochLoss { epoch: 0, l_td: 2.5, l_gs: 1.1, l_total: 8.0 },
            EpochLoss { epoch: 1, l_td: 2.0, l_gs: 0.9, l_total: 6.5 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_loss_trace(&path, &rows).unwrap();
        assert_eq!(read_loss_trace(&path).unwrap(), rows);
    }
}
