use rand::seq::SliceRandom;

use super::{ClientShard, Dataset};
use crate::error::{Error, Result};
use crate::nn::Batch;
use crate::seed;

/// One shuffled epoch over a shard, in batches of at most `batch_size`.
pub struct Batches<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

pub fn iterate_batches<'a>(
    ds: &'a Dataset,
    shard: &ClientShard,
    batch_size: usize,
    seed: u64,
) -> Result<Batches<'a>> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be >= 1"));
    }
    let mut order = shard.indices.clone();
    order.shuffle(&mut seed::rng(seed));
    Ok(Batches {
        ds,
        order,
        batch_size,
        pos: 0,
    })
}

impl Batches<'_> {
    /// Dataset indices in visiting order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

impl Iterator for Batches<'_> {
    type Item = Batch<f32>;

    fn next(&mut self) -> Option<Batch<f32>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.ds.batch(&self.order[self.pos..end]);
        self.pos = end;
        Some(batch)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.pos).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for Batches<'_> {}
