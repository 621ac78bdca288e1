use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

/// One epoch of batches, each holding `pos_per_batch` positives followed by
/// `neg_per_batch = 3 * pos_per_batch` negatives. No index repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BatchPlan {
    pub batches: Vec<Vec<usize>>,
    pub pos_per_batch: usize,
    pub neg_per_batch: usize,
}

impl BatchPlan {
    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }
}

/// Number of full 1:3 batches a pool supports.
pub fn batch_capacity(positives: usize, negatives: usize, batch_size: usize) -> usize {
    let p = batch_size / 4;
    (positives / p).min(negatives / (3 * p))
}

pub(crate) fn check_batch_size(batch_size: usize) -> Result<()> {
    if batch_size == 0 || !batch_size.is_multiple_of(4) {
        return Err(Error::Config(format!(
            "batch size must be a positive multiple of 4, got {batch_size}"
        )));
    }
    Ok(())
}

/// Dynamic undersampling plan for one epoch.
///
/// Positive and negative pools are reshuffled per `(seed, epoch)`; batches are
/// cut until either pool runs out and the partial remainder is dropped.
pub fn plan_epoch(labels: &[u8], batch_size: usize, seed: u64, epoch: u64) -> Result<BatchPlan> {
    check_batch_size(batch_size)?;
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for (i, &y) in labels.iter().enumerate() {
        if y == 1 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    let pos_per_batch = batch_size / 4;
    let neg_per_batch = 3 * pos_per_batch;
    if pos.len() < pos_per_batch || neg.len() < neg_per_batch {
        return Err(Error::Capacity {
            batch_size,
            need_pos: pos_per_batch,
            need_neg: neg_per_batch,
            have_pos: pos.len(),
            have_neg: neg.len(),
        });
    }

    pos.shuffle(&mut rng::stream(seed, "plan/pos", epoch));
    neg.shuffle(&mut rng::stream(seed, "plan/neg", epoch));

    let count = batch_capacity(pos.len(), neg.len(), batch_size);
    let batches = pos
        .chunks_exact(pos_per_batch)
        .zip(neg.chunks_exact(neg_per_batch))
        .take(count)
        .map(|(p, n)| p.iter().chain(n).copied().collect())
        .collect();

    Ok(BatchPlan {
        batches,
        pos_per_batch,
        neg_per_batch,
    })
}
