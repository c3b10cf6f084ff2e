use super::real::Real;
use super::spec::InputShape;
use crate::error::{Error, Result};

/// A mini-batch: inputs laid out as (B, C, H, W), one label per example.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<F = f32> {
    inputs: Vec<F>,
    labels: Vec<usize>,
    shape: InputShape,
}

impl<F: Real> Batch<F> {
    pub fn new(inputs: Vec<F>, labels: Vec<usize>, shape: InputShape) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::config("empty batch"));
        }
        if inputs.len() != labels.len() * shape.volume() {
            return Err(Error::config(format!(
                "batch of {} labels has {} input values, expected {}",
                labels.len(),
                inputs.len(),
                labels.len() * shape.volume()
            )));
        }
        Ok(Batch {
            inputs,
            labels,
            shape,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &[F] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn shape(&self) -> InputShape {
        self.shape
    }

    /// The single-example batch at position `i`.
    pub fn example(&self, i: usize) -> Batch<F> {
        let v = self.shape.volume();
        Batch {
            inputs: self.inputs[i * v..(i + 1) * v].to_vec(),
            labels: vec![self.labels[i]],
            shape: self.shape,
        }
    }
}
