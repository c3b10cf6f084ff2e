use super::params::ParamVector;
use super::real::Real;
use crate::error::{Error, Result};

/// Returns `params - lr * grad`.
pub fn sgd_step<F: Real>(params: &ParamVector<F>, grad: &ParamVector<F>, lr: F) -> Result<ParamVector<F>> {
    let mut out = params.clone();
    sgd_step_in_place(&mut out, grad, lr)?;
    Ok(out)
}

pub fn sgd_step_in_place<F: Real>(params: &mut ParamVector<F>, grad: &ParamVector<F>, lr: F) -> Result<()> {
    if params.len() != grad.len() {
        return Err(Error::config(format!(
            "sgd step: {} parameters but {} gradient entries",
            params.len(),
            grad.len()
        )));
    }
    for (p, &g) in params.iter_mut().zip(grad.iter()) {
        *p = *p - lr * g;
    }
    Ok(())
}

/// Learning rate for a 1-based communication round: `base * decay^(round - 1)`.
pub fn lr_at_round(round: usize, base: f64, decay: f64) -> f64 {
    debug_assert!(round >= 1);
    base * decay.powi(round.saturating_sub(1) as i32)
}
