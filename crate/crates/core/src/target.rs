//! Temporal-ensemble constraint target.
//!
//! After every aggregation the server folds the new global model into an
//! exponential moving average and divides out the start-up bias:
//!
//! ```text
//! ensemble <- (1 - beta) * global_t + beta * ensemble
//! target    = ensemble / (1 - beta^t)
//! ```
//!
//! The target is a convex combination of every global model seen so far,
//! with weight `(1 - beta) beta^(t - i) / (1 - beta^t)` on round `i`.

use crate::error::{Error, Result};
use crate::nn::ParamVector;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetTracker {
    beta: f64,
    /// Running (biased) ensemble, kept in f64.
    ensemble: Vec<f64>,
    rounds: u32,
    current: Option<ParamVector>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::config(format!("ensemble momentum must be in [0, 1), got {beta}")));
    }
    Ok(())
}

impl TargetTracker {
    pub fn new(beta: f64, param_count: usize) -> Result<Self> {
        check_beta(beta)?;
        Ok(TargetTracker {
            beta,
            ensemble: vec![0.0; param_count],
            rounds: 0,
            current: None,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of global models folded in so far.
    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    /// The bias-corrected target, or `None` before the first update.
    pub fn current(&self) -> Option<&ParamVector> {
        self.current.as_ref()
    }

    pub fn ensemble(&self) -> &[f64] {
        &self.ensemble
    }

    /// Folds in the global model of the round just aggregated and returns the
    /// new target.
    pub fn update(&mut self, global: &ParamVector) -> Result<&ParamVector> {
        global.check_len(self.ensemble.len(), "global model")?;
        self.rounds += 1;
        let keep = self.beta;
        let take = 1.0 - self.beta;
        for (e, &g) in self.ensemble.iter_mut().zip(global.iter()) {
            *e = take * g as f64 + keep * *e;
        }
        let correction = 1.0 - self.beta.powi(self.rounds as i32);
        let target: Vec<f32> = self.ensemble.iter().map(|&e| (e / correction) as f32).collect();
        Ok(self.current.insert(target.into()))
    }
}

/// Weights the tracker places on each of `t` past global models, oldest first.
pub fn ensemble_weights(t: usize, beta: f64) -> Vec<f64> {
    let norm = 1.0 - beta.powi(t as i32);
    (1..=t)
        .map(|i| (1.0 - beta) * beta.powi((t - i) as i32) / norm)
        .collect()
}

/// Direct weighted sum over the whole history; the reference the recursive
/// tracker must agree with.
pub fn closed_form_oracle(history: &[ParamVector], beta: f64) -> Result<ParamVector<f64>> {
    check_beta(beta)?;
    let first = history
        .first()
        .ok_or_else(|| Error::config("ensemble history is empty"))?;
    let weights = ensemble_weights(history.len(), beta);
    let mut out = vec![0.0f64; first.len()];
    for (g, w) in history.iter().zip(&weights) {
        g.check_len(first.len(), "history entry")?;
        for (o, &v) in out.iter_mut().zip(g.iter()) {
            *o += w * v as f64;
        }
    }
    Ok(out.into())
}
