//! Masked-sequence construction.
//!
//! Per walk, `⌈fraction·len⌉` node positions (at least one) are selected
//! uniformly without replacement; a selected token is replaced with MASK,
//! with a random node token, or kept, under the standard 80/10/10 split.
//! CLS and PAD are never masked.

use super::WalkCorpus;
use crate::encoder::Vocabulary;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskPolicy {
    pub replace: f64,
    pub random: f64,
    pub keep: f64,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        MaskPolicy {
            replace: 0.8,
            random: 0.1,
            keep: 0.1,
        }
    }
}

impl MaskPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.replace < 0.0 || self.random < 0.0 || self.keep < 0.0 {
            return Err("mask policy probabilities must be non-negative".into());
        }
        let sum = self.replace + self.random + self.keep;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("mask policy probabilities sum to {sum}, expected 1"));
        }
        Ok(())
    }
}

/// One training sequence: CLS at position 0, node tokens, PAD tail.
/// `masked` holds `(position, original node token)` pairs sorted by
/// position; `graph_index` is the graph head's target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedSequence {
    pub tokens: Vec<usize>,
    pub masked: Vec<(usize, usize)>,
    pub graph_index: usize,
}

/// Build masked sequences for the walks selected by `indices`.
pub fn make_masked_batch(
    corpus: &WalkCorpus,
    indices: &[usize],
    vocab: &Vocabulary,
    max_seq: usize,
    fraction: f64,
    policy: &MaskPolicy,
    rng: &mut ChaCha8Rng,
) -> Vec<MaskedSequence> {
    indices
        .iter()
        .map(|&i| mask_walk_tokens(
            &corpus.walks[i].nodes,
            corpus.graph_of[i],
            vocab,
            max_seq,
            fraction,
            policy,
            rng,
        ))
        .collect()
}

fn mask_walk_tokens(
    nodes: &[u32],
    graph_index: usize,
    vocab: &Vocabulary,
    max_seq: usize,
    fraction: f64,
    policy: &MaskPolicy,
    rng: &mut ChaCha8Rng,
) -> MaskedSequence {
    let len = nodes.len();
    debug_assert!(len < max_seq);
    let mut tokens = Vec::with_capacity(max_seq);
    tokens.push(vocab.cls());
    tokens.extend(nodes.iter().map(|&n| n as usize));
    tokens.resize(max_seq, vocab.pad());

    let n_mask = ((fraction * len as f64).ceil() as usize).clamp(1, len);
    // Partial Fisher-Yates over the node positions 1..=len.
    let mut positions: Vec<usize> = (1..=len).collect();
    for i in 0..n_mask {
        let j = rng.gen_range(i..positions.len());
        positions.swap(i, j);
    }
    let mut selected = positions[..n_mask].to_vec();
    selected.sort_unstable();

    let mut masked = Vec::with_capacity(n_mask);
    for pos in selected {
        let target = tokens[pos];
        let roll: f64 = rng.gen();
        if roll < policy.replace {
            tokens[pos] = vocab.mask();
        } else if roll < policy.replace + policy.random {
            tokens[pos] = rng.gen_range(0..vocab.regions());
        } // else keep the original token
        masked.push((pos, target));
    }
    MaskedSequence {
        tokens,
        masked,
        graph_index,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::tempwalk::TemporalWalk;
    use proptest::prelude::*;

    fn corpus_of(walks: Vec<Vec<u32>>) -> WalkCorpus {
        WalkCorpus::from_walks(
            walks
                .into_iter()
                .enumerate()
                .map(|(i, nodes)| TemporalWalk {
                    graph_id: format!("g{}", i % 2),
                    times: vec![0; nodes.len() - 1],
                    nodes,
                })
                .collect(),
        )
    }

    #[test]
    fn mask_counts_follow_ceiling_rule() {
        let vocab = Vocabulary::new(10);
        let corpus = corpus_of(vec![(0..20).collect(), vec![3, 4]]);
        let mut rng = stream_rng(1, &[0]);
        let batch = make_masked_batch(&corpus, &[0, 1], &vocab, 21, 0.15, &MaskPolicy::default(), &mut rng);
        assert_eq!(batch[0].masked.len(), 3); // ceil(0.15 * 20)
        assert_eq!(batch[1].masked.len(), 1); // ceil(0.15 * 2)
    }

    #[test]
    fn masking_is_deterministic_given_seed() {
        let vocab = Vocabulary::new(10);
        let corpus = corpus_of(vec![(0..15).collect(), (0..8).collect()]);
        let policy = MaskPolicy::default();
        let a = make_masked_batch(&corpus, &[0, 1], &vocab, 21, 0.15, &policy, &mut stream_rng(9, &[4]));
        let b = make_masked_batch(&corpus, &[0, 1], &vocab, 21, 0.15, &policy, &mut stream_rng(9, &[4]));
        assert_eq!(a, b);
    }

    #[test]
    fn policy_must_sum_to_one() {
        let bad = MaskPolicy { replace: 0.8, random: 0.3, keep: 0.1 };
        assert!(bad.validate().is_err());
        assert!(MaskPolicy::default().validate().is_ok());
    }

    proptest! {
        /// CLS and PAD are never altered, every masked target is the original
        /// node, and restoring targets reconstructs the walk exactly.
        #[test]
        fn targets_reconstruct_the_original_walk(
            seed in 0u64..300,
            len in 2usize..20,
        ) {
            let vocab = Vocabulary::new(12);
            let mut rng = stream_rng(seed, &[7]);
            use rand::Rng;
            let nodes: Vec<u32> = (0..len).map(|_| rng.gen_range(0..12u32)).collect();
            let corpus = corpus_of(vec![nodes.clone()]);
            let batch = make_masked_batch(
                &corpus, &[0], &vocab, 21, 0.15, &MaskPolicy::default(), &mut rng,
            );
            let seq = &batch[0];
            prop_assert_eq!(seq.tokens[0], vocab.cls());
            for tok in &seq.tokens[1 + len..] {
                prop_assert_eq!(*tok, vocab.pad());
            }
            for &(pos, _) in &seq.masked {
                prop_assert!(pos >= 1 && pos <= len);
            }
            let mut restored = seq.tokens.clone();
            for &(pos, target) in &seq.masked {
                restored[pos] = target;
            }
            let original: Vec<usize> = nodes.iter().map(|&n| n as usize).collect();
            prop_assert_eq!(&restored[1..=len], &original[..]);
            // Unmasked node positions were never altered.
            let masked_pos: Vec<usize> = seq.masked.iter().map(|&(p, _)| p).collect();
            for p in 1..=len {
                if !masked_pos.contains(&p) {
                    prop_assert_eq!(seq.tokens[p], original[p - 1]);
                }
            }
        }
    }
}
