//! Stratified k-fold assignment.

use super::EvalError;
use crate::rng::stream_rng;
use rand::seq::SliceRandom;

/// Partition item indices into `k` disjoint folds preserving the class
/// ratio: each fold's per-class count differs from the proportional share by
/// at most one. The two classes' remainder folds are staggered (class 0
/// extras go to the front folds, class 1 extras to the back) so fold sizes
/// stay within one of each other.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    let mut class0: Vec<usize> = Vec::new();
    let mut class1: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        match l {
            0 => class0.push(i),
            1 => class1.push(i),
            other => {
                return Err(EvalError::InvalidConfig(format!(
                    "label {other} at index {i} is not binary"
                )))
            }
        }
    }
    for (class, members) in [(0u8, &class0), (1u8, &class1)] {
        if members.len() < k {
            return Err(EvalError::InfeasibleStratification {
                class,
                count: members.len(),
                k,
            });
        }
    }
    class0.shuffle(&mut stream_rng(seed, &[0]));
    class1.shuffle(&mut stream_rng(seed, &[1]));

    let mut folds = vec![Vec::new(); k];
    distribute(&class0, k, false, &mut folds);
    distribute(&class1, k, true, &mut folds);
    Ok(folds)
}

fn distribute(members: &[usize], k: usize, extras_at_back: bool, folds: &mut [Vec<usize>]) {
    let base = members.len() / k;
    let remainder = members.len() % k;
    let mut cursor = 0;
    for (f, fold) in folds.iter_mut().enumerate() {
        let extra = if extras_at_back { f >= k - remainder } else { f < remainder };
        let take = base + usize::from(extra);
        fold.extend(&members[cursor..cursor + take]);
        cursor += take;
    }
    debug_assert_eq!(cursor, members.len());
}
