//! Constraint terms added to the local objective.
//!
//! * `Prox`: `alpha * ||w - target||^2`
//! * `FisherDiag`: `alpha * sum_i f_i (w_i - target_i)^2`
//!
//! The coefficient is used as written, without a factor of 1/2, so the
//! gradient of `Prox` is `2 * alpha * (w - target)`.

use rand::seq::index;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{Batch, Network, ParamVector, Real};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyTerm<F: Real = f32> {
    None,
    Prox {
        alpha: f64,
        target: ParamVector<F>,
    },
    FisherDiag {
        alpha: f64,
        target: ParamVector<F>,
        fisher: ParamVector<F>,
    },
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!(
            "penalty coefficient must be finite and >= 0, got {alpha}"
        )));
    }
    Ok(())
}

impl<F: Real> PenaltyTerm<F> {
    pub fn prox(alpha: f64, target: ParamVector<F>) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(PenaltyTerm::Prox { alpha, target })
    }

    pub fn fisher_diag(alpha: f64, target: ParamVector<F>, fisher: ParamVector<F>) -> Result<Self> {
        check_alpha(alpha)?;
        fisher.check_len(target.len(), "fisher diagonal")?;
        if fisher.iter().any(|f| !f.is_finite() || *f < F::zero()) {
            return Err(Error::config("fisher diagonal entries must be finite and >= 0"));
        }
        Ok(PenaltyTerm::FisherDiag {
            alpha,
            target,
            fisher,
        })
    }

    pub fn alpha(&self) -> f64 {
        match self {
            PenaltyTerm::None => 0.0,
            PenaltyTerm::Prox { alpha, .. } | PenaltyTerm::FisherDiag { alpha, .. } => *alpha,
        }
    }

    pub fn target(&self) -> Option<&ParamVector<F>> {
        match self {
            PenaltyTerm::None => None,
            PenaltyTerm::Prox { target, .. } | PenaltyTerm::FisherDiag { target, .. } => Some(target),
        }
    }

    /// A zero coefficient contributes nothing, not even signed zeros.
    pub fn is_active(&self) -> bool {
        self.alpha() != 0.0
    }

    fn check(&self, w: &ParamVector<F>) -> Result<()> {
        check_alpha(self.alpha())?;
        if let Some(target) = self.target() {
            target.check_len(w.len(), "penalty target")?;
        }
        if let PenaltyTerm::FisherDiag { fisher, .. } = self {
            fisher.check_len(w.len(), "fisher diagonal")?;
        }
        Ok(())
    }

    pub fn value(&self, w: &ParamVector<F>) -> Result<f64> {
        self.check(w)?;
        let sum = match self {
            PenaltyTerm::None => return Ok(0.0),
            PenaltyTerm::Prox { target, .. } => w
                .iter()
                .zip(target.iter())
                .map(|(&wi, &ti)| {
                    let d = (wi - ti).widen();
                    d * d
                })
                .sum::<f64>(),
            PenaltyTerm::FisherDiag { target, fisher, .. } => w
                .iter()
                .zip(target.iter())
                .zip(fisher.iter())
                .map(|((&wi, &ti), &fi)| {
                    let d = (wi - ti).widen();
                    fi.widen() * d * d
                })
                .sum::<f64>(),
        };
        Ok(self.alpha() * sum)
    }

    /// Adds the penalty gradient into `grad`.
    pub fn add_grad(&self, w: &ParamVector<F>, grad: &mut ParamVector<F>) -> Result<()> {
        self.check(w)?;
        grad.check_len(w.len(), "gradient")?;
        if !self.is_active() {
            return Ok(());
        }
        let two_alpha = F::from_f64(2.0 * self.alpha());
        match self {
            PenaltyTerm::None => {}
            PenaltyTerm::Prox { target, .. } => {
                for ((g, &wi), &ti) in grad.iter_mut().zip(w.iter()).zip(target.iter()) {
                    *g = *g + two_alpha * (wi - ti);
                }
            }
            PenaltyTerm::FisherDiag { target, fisher, .. } => {
                for (((g, &wi), &ti), &fi) in grad
                    .iter_mut()
                    .zip(w.iter())
                    .zip(target.iter())
                    .zip(fisher.iter())
                {
                    *g = *g + two_alpha * (fi * (wi - ti));
                }
            }
        }
        Ok(())
    }

    pub fn grad(&self, w: &ParamVector<F>) -> Result<ParamVector<F>> {
        let mut g = ParamVector::zeros(w.len());
        self.add_grad(w, &mut g)?;
        Ok(g)
    }
}

/// Empirical Fisher diagonal, `mean_x (d log p(y|x) / d w_i)^2`, using the
/// true labels of at most `max_samples` examples of `ds`. Larger datasets are
/// subsampled without replacement using `seed`.
pub fn fisher_diag(net: &Network<f32>, ds: &Dataset, max_samples: usize, seed: u64) -> Result<ParamVector<f32>> {
    if ds.is_empty() {
        return Err(Error::config("fisher estimate needs a non-empty dataset"));
    }
    let n = ds.len();
    let chosen: Vec<usize> = if max_samples == 0 || n <= max_samples {
        (0..n).collect()
    } else {
        let mut v = index::sample(&mut seed::rng(seed), n, max_samples).into_vec();
        v.sort_unstable();
        v
    };
    fisher_diag_from_examples(net, chosen.iter().map(|&i| ds.example_batch(i)))
}

/// Fisher diagonal over an explicit sequence of single examples.
pub fn fisher_diag_from_examples<F: Real>(
    net: &Network<F>,
    examples: impl IntoIterator<Item = Batch<F>>,
) -> Result<ParamVector<F>> {
    let mut acc = vec![0.0f64; net.params().len()];
    let mut count = 0usize;
    for ex in examples {
        for i in 0..ex.len() {
            let one = if ex.len() == 1 { ex.clone() } else { ex.example(i) };
            // For a single example the mean cross-entropy is -log p(y|x).
            let (_, g) = net.data_loss_and_grad(&one)?;
            for (a, &gi) in acc.iter_mut().zip(g.iter()) {
                let v = gi.widen();
                *a += v * v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::config("fisher estimate needs at least one example"));
    }
    let inv = 1.0 / count as f64;
    Ok(acc.into_iter().map(|a| F::from_f64(a * inv)).collect::<Vec<_>>().into())
}
