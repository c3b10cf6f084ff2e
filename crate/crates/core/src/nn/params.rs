use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{Error, Result};

/// All parameters of a model as one flat vector.
///
/// Layout is layer-major: for each parametrized layer in order, its weights
/// (row-major, `[out][in]` for dense, `[out][in][ky][kx]` for convolutions)
/// followed by its biases. Aggregation, penalties and ensemble targets all
/// operate on this representation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector<F = f32>(Vec<F>);

impl<F: Real> ParamVector<F> {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![F::zero(); len])
    }

    pub fn into_inner(self) -> Vec<F> {
        self.0
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }

    pub fn cast<G: Real>(&self) -> ParamVector<G> {
        ParamVector(self.0.iter().map(|&v| G::from_f64(v.widen())).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_len(&self, expected: usize, what: &str) -> Result<()> {
        if self.len() != expected {
            return Err(Error::config(format!(
                "{what}: length {} does not match parameter count {expected}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a.widen() - b.widen()).abs())
            .fold(0.0, f64::max)
    }
}

impl<F> From<Vec<F>> for ParamVector<F> {
    fn from(v: Vec<F>) -> Self {
        ParamVector(v)
    }
}

impl<F> Deref for ParamVector<F> {
    type Target = [F];
    fn deref(&self) -> &[F] {
        &self.0
    }
}

impl<F> DerefMut for ParamVector<F> {
    fn deref_mut(&mut self) -> &mut [F] {
        &mut self.0
    }
}
