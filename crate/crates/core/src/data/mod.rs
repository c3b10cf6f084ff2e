//! Datasets, ingestion, non-IID partitioning and batching.

mod batches;
mod cifar;
mod idx;
mod partition;

pub use batches::{iterate_batches, Batches};
pub use cifar::{encode_cifar10, load_cifar10, parse_cifar10, CIFAR_RECORD_BYTES};
pub use idx::{encode_idx_images, encode_idx_labels, load_idx, parse_idx, write_idx};
pub use partition::{dirichlet_partition, split_proxy, ClientShard, PartitionConfig};

use crate::error::{Error, Result};
use crate::nn::{Batch, InputShape};

pub const CLASS_COUNT: usize = 10;

/// Images in (N, C, H, W) order with values in [0, 1], plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<f32>,
    labels: Vec<u8>,
    shape: InputShape,
    classes: usize,
}

impl Dataset {
    pub fn new(images: Vec<f32>, labels: Vec<u8>, shape: InputShape, classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::config("dataset has no examples"));
        }
        if images.len() != labels.len() * shape.volume() {
            return Err(Error::config(format!(
                "{} labels but {} pixel values for shape {shape:?}",
                labels.len(),
                images.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y as usize >= classes) {
            return Err(Error::config(format!("label {bad} outside 0..{classes}")));
        }
        Ok(Dataset {
            images,
            labels,
            shape,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn shape(&self) -> InputShape {
        self.shape
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn images(&self) -> &[f32] {
        &self.images
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let v = self.shape.volume();
        &self.images[i * v..(i + 1) * v]
    }

    /// Copies the listed examples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut images = Vec::with_capacity(indices.len() * self.shape.volume());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::config(format!("index {i} out of range for {} examples", self.len())));
            }
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(images, labels, self.shape, self.classes)
    }

    /// The first `n` examples (or all of them if `n >= len`).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len()).max(1);
        let v = self.shape.volume();
        Dataset {
            images: self.images[..n * v].to_vec(),
            labels: self.labels[..n].to_vec(),
            shape: self.shape,
            classes: self.classes,
        }
    }

    pub fn label_histogram(&self, indices: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        for i in indices {
            h[self.labels[i] as usize] += 1;
        }
        h
    }

    /// Empirical class distribution of the whole dataset.
    pub fn class_distribution(&self) -> Vec<f64> {
        let h = self.label_histogram(0..self.len());
        h.iter().map(|&c| c as f64 / self.len() as f64).collect()
    }

    pub fn batch(&self, indices: &[usize]) -> Batch<f32> {
        let mut inputs = Vec::with_capacity(indices.len() * self.shape.volume());
        for &i in indices {
            inputs.extend_from_slice(self.image(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i] as usize).collect();
        Batch::new(inputs, labels, self.shape).expect("indices drawn from this dataset")
    }

    pub fn example_batch(&self, i: usize) -> Batch<f32> {
        self.batch(&[i])
    }
}
