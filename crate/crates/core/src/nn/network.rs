use rand::Rng;

use super::batch::Batch;
use super::loss::{softmax_cross_entropy, Logits};
use super::params::ParamVector;
use super::real::{gemm, MatRef, Real};
use super::spec::{LayerPlan, ModelSpec};
use crate::error::{Error, Result};
use crate::penalty::PenaltyTerm;
use crate::seed;

/// Weights and biases of one parametrized layer, in flat-layout order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F = f32> {
    pub weights: Vec<F>,
    pub bias: Vec<F>,
}

/// A model: architecture plus its flat parameter vector.
///
/// The network holds no state besides its parameters, so every pass is a
/// pure function of `(params, batch)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<F: Real = f32> {
    spec: ModelSpec,
    params: ParamVector<F>,
}

/// Correct-prediction count and summed cross-entropy over one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchScore {
    pub correct: usize,
    pub loss_sum: f64,
    pub count: usize,
}

enum Cache<F> {
    Conv { cols: Vec<F>, out: Vec<F> },
    Pool { argmax: Vec<u32>, in_len: usize },
    Dense { input: Vec<F>, out: Vec<F> },
}

impl<F: Real> Network<F> {
    pub fn zeros(spec: ModelSpec) -> Self {
        let params = ParamVector::zeros(spec.param_count());
        Network { spec, params }
    }

    /// Fan-in scaled uniform initialization, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`
    /// for every weight, zero biases.
    pub fn initialized(spec: ModelSpec, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut params = vec![F::zero(); spec.param_count()];
        for layer in &spec.plan().layers {
            let (fan_in, w_off, b_off) = match *layer {
                LayerPlan::Conv {
                    in_c, k, w_off, b_off, ..
                } => (in_c * k * k, w_off, b_off),
                LayerPlan::Dense {
                    inputs, w_off, b_off, ..
                } => (inputs, w_off, b_off),
                LayerPlan::Pool { .. } => continue,
            };
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[w_off..b_off] {
                *p = F::from_f64(rng.random_range(-bound..bound));
            }
        }
        Network {
            spec,
            params: params.into(),
        }
    }

    pub fn with_params(spec: ModelSpec, params: ParamVector<F>) -> Result<Self> {
        params.check_len(spec.param_count(), "network parameters")?;
        Ok(Network { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector<F> {
        &self.params
    }

    pub fn into_params(self) -> ParamVector<F> {
        self.params
    }

    pub fn set_params(&mut self, params: ParamVector<F>) -> Result<()> {
        params.check_len(self.spec.param_count(), "network parameters")?;
        self.params = params;
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamVector<F> {
        &mut self.params
    }

    /// Per-layer views of the flat parameter vector.
    pub fn unflatten(&self) -> Vec<LayerParams<F>> {
        self.spec
            .plan()
            .layers
            .iter()
            .filter_map(|layer| match *layer {
                LayerPlan::Conv {
                    w_off,
                    b_off,
                    out_c,
                    ..
                } => Some((w_off, b_off, out_c)),
                LayerPlan::Dense {
                    w_off, b_off, units, ..
                } => Some((w_off, b_off, units)),
                LayerPlan::Pool { .. } => None,
            })
            .map(|(w_off, b_off, n_bias)| LayerParams {
                weights: self.params[w_off..b_off].to_vec(),
                bias: self.params[b_off..b_off + n_bias].to_vec(),
            })
            .collect()
    }

    /// Inverse of [`Network::unflatten`].
    pub fn flatten(spec: &ModelSpec, layers: &[LayerParams<F>]) -> Result<ParamVector<F>> {
        let mut out = Vec::with_capacity(spec.param_count());
        for l in layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        let out = ParamVector::from(out);
        out.check_len(spec.param_count(), "flattened layers")?;
        Ok(out)
    }

    fn check_batch(&self, batch: &Batch<F>) -> Result<()> {
        if batch.shape() != self.spec.input() {
            return Err(Error::config(format!(
                "batch shape {:?} does not match model input {:?}",
                batch.shape(),
                self.spec.input()
            )));
        }
        let classes = self.spec.classes();
        if let Some(&bad) = batch.labels().iter().find(|&&y| y >= classes) {
            return Err(Error::config(format!(
                "label {bad} outside class range 0..{classes}"
            )));
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Batch<F>) -> Result<Logits<F>> {
        self.check_batch(batch)?;
        let (data, _) = self.run_forward(batch, false);
        Ok(Logits {
            data,
            classes: self.spec.classes(),
        })
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn data_loss_and_grad(&self, batch: &Batch<F>) -> Result<(f64, ParamVector<F>)> {
        self.check_batch(batch)?;
        let (data, caches) = self.run_forward(batch, true);
        let logits = Logits {
            data,
            classes: self.spec.classes(),
        };
        let (loss, dlogits) = softmax_cross_entropy(&logits, batch.labels());
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(loss));
        }
        let grad = self.run_backward(batch.len(), caches, dlogits);
        Ok((loss, grad))
    }

    /// Total local objective: mean cross-entropy plus `penalty`, and its gradient.
    pub fn loss_and_grad(
        &self,
        batch: &Batch<F>,
        penalty: &PenaltyTerm<F>,
    ) -> Result<(f64, ParamVector<F>)> {
        let (mut loss, mut grad) = self.data_loss_and_grad(batch)?;
        if penalty.is_active() {
            loss += penalty.value(&self.params)?;
            penalty.add_grad(&self.params, &mut grad)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(loss));
            }
        }
        Ok((loss, grad))
    }

    pub fn score(&self, batch: &Batch<F>) -> Result<BatchScore> {
        let logits = self.forward(batch)?;
        let mut score = BatchScore {
            count: batch.len(),
            ..Default::default()
        };
        for (i, &y) in batch.labels().iter().enumerate() {
            if logits.argmax(i) == y {
                score.correct += 1;
            }
            let row = logits.row(i);
            let m = row.iter().copied().fold(F::neg_infinity(), F::max);
            let sum: F = row.iter().map(|&z| (z - m).exp()).sum();
            score.loss_sum += (m + sum.ln() - row[y]).widen();
        }
        Ok(score)
    }

    fn run_forward(&self, batch: &Batch<F>, keep: bool) -> (Vec<F>, Vec<Cache<F>>) {
        let b = batch.len();
        let input = batch.shape();
        let p = &self.params;
        let mut caches = Vec::new();

        // Activations travel in (C, B, H, W) order while spatial and
        // (B, features) order once flattened.
        let mut act = to_cbhw(batch.inputs(), b, input.channels, input.height * input.width);

        for layer in &self.spec.plan().layers {
            match *layer {
                LayerPlan::Conv {
                    in_c,
                    in_h,
                    in_w,
                    out_c,
                    k,
                    out_h,
                    out_w,
                    relu,
                    w_off,
                    b_off,
                } => {
                    let n = b * out_h * out_w;
                    let ckk = in_c * k * k;
                    let cols = im2col(&act, in_c, b, in_h, in_w, k, out_h, out_w);
                    let mut out = vec![F::zero(); out_c * n];
                    gemm(
                        F::one(),
                        MatRef::row_major(&p[w_off..b_off], out_c, ckk),
                        MatRef::row_major(&cols, ckk, n),
                        F::zero(),
                        &mut out,
                    );
                    for (o, row) in out.chunks_exact_mut(n).enumerate() {
                        let bias = p[b_off + o];
                        for v in row {
                            *v = *v + bias;
                            if relu && *v < F::zero() {
                                *v = F::zero();
                            }
                        }
                    }
                    if keep {
                        caches.push(Cache::Conv {
                            cols,
                            out: out.clone(),
                        });
                    }
                    act = out;
                }
                LayerPlan::Pool {
                    c,
                    in_h,
                    in_w,
                    size,
                    stride,
                    out_h,
                    out_w,
                } => {
                    let planes = c * b;
                    let mut out = vec![F::zero(); planes * out_h * out_w];
                    let mut argmax = vec![0u32; out.len()];
                    for plane in 0..planes {
                        let src = plane * in_h * in_w;
                        let dst = plane * out_h * out_w;
                        for oy in 0..out_h {
                            for ox in 0..out_w {
                                let mut best = src + oy * stride * in_w + ox * stride;
                                for dy in 0..size {
                                    let row = src + (oy * stride + dy) * in_w + ox * stride;
                                    for idx in row..row + size {
                                        if act[idx] > act[best] {
                                            best = idx;
                                        }
                                    }
                                }
                                out[dst + oy * out_w + ox] = act[best];
                                argmax[dst + oy * out_w + ox] = best as u32;
                            }
                        }
                    }
                    if keep {
                        caches.push(Cache::Pool {
                            argmax,
                            in_len: act.len(),
                        });
                    }
                    act = out;
                }
                LayerPlan::Dense {
                    inputs,
                    units,
                    relu,
                    from_spatial,
                    w_off,
                    b_off,
                } => {
                    let x = match from_spatial {
                        Some((c, hw)) => from_cbhw(&act, b, c, hw),
                        None => act,
                    };
                    let mut out = vec![F::zero(); b * units];
                    gemm(
                        F::one(),
                        MatRef::row_major(&x, b, inputs),
                        MatRef::row_major(&p[w_off..b_off], units, inputs).t(),
                        F::zero(),
                        &mut out,
                    );
                    let bias = &p[b_off..b_off + units];
                    for row in out.chunks_exact_mut(units) {
                        for (v, &bj) in row.iter_mut().zip(bias) {
                            *v = *v + bj;
                            if relu && *v < F::zero() {
                                *v = F::zero();
                            }
                        }
                    }
                    if keep {
                        caches.push(Cache::Dense {
                            input: x,
                            out: out.clone(),
                        });
                    }
                    act = out;
                }
            }
        }
        (act, caches)
    }

    fn run_backward(&self, b: usize, mut caches: Vec<Cache<F>>, dlogits: Vec<F>) -> ParamVector<F> {
        let p = &self.params;
        let mut grad = vec![F::zero(); p.len()];
        let mut g = dlogits;
        let layers = &self.spec.plan().layers;

        for (li, layer) in layers.iter().enumerate().rev() {
            let cache = caches.pop().expect("one cache entry per layer");
            let first = li == 0;
            match (*layer, cache) {
                (
                    LayerPlan::Conv {
                        in_c,
                        in_h,
                        in_w,
                        out_c,
                        k,
                        out_h,
                        out_w,
                        relu,
                        w_off,
                        b_off,
                    },
                    Cache::Conv { cols, out },
                ) => {
                    let n = b * out_h * out_w;
                    let ckk = in_c * k * k;
                    if relu {
                        mask_relu(&mut g, &out);
                    }
                    gemm(
                        F::one(),
                        MatRef::row_major(&g, out_c, n),
                        MatRef::row_major(&cols, ckk, n).t(),
                        F::zero(),
                        &mut grad[w_off..b_off],
                    );
                    for (o, row) in g.chunks_exact(n).enumerate() {
                        grad[b_off + o] = row.iter().copied().sum();
                    }
                    if !first {
                        let mut dcols = vec![F::zero(); ckk * n];
                        gemm(
                            F::one(),
                            MatRef::row_major(&p[w_off..b_off], out_c, ckk).t(),
                            MatRef::row_major(&g, out_c, n),
                            F::zero(),
                            &mut dcols,
                        );
                        g = col2im(&dcols, in_c, b, in_h, in_w, k, out_h, out_w);
                    }
                }
                (LayerPlan::Pool { .. }, Cache::Pool { argmax, in_len }) => {
                    let mut dx = vec![F::zero(); in_len];
                    for (&src, &gv) in argmax.iter().zip(&g) {
                        dx[src as usize] = dx[src as usize] + gv;
                    }
                    g = dx;
                }
                (
                    LayerPlan::Dense {
                        inputs,
                        units,
                        relu,
                        from_spatial,
                        w_off,
                        b_off,
                    },
                    Cache::Dense { input, out },
                ) => {
                    if relu {
                        mask_relu(&mut g, &out);
                    }
                    gemm(
                        F::one(),
                        MatRef::row_major(&g, b, units).t(),
                        MatRef::row_major(&input, b, inputs),
                        F::zero(),
                        &mut grad[w_off..b_off],
                    );
                    for j in 0..units {
                        grad[b_off + j] = (0..b).map(|i| g[i * units + j]).sum();
                    }
                    if !first {
                        let mut dx = vec![F::zero(); b * inputs];
                        gemm(
                            F::one(),
                            MatRef::row_major(&g, b, units),
                            MatRef::row_major(&p[w_off..b_off], units, inputs),
                            F::zero(),
                            &mut dx,
                        );
                        g = match from_spatial {
                            Some((c, hw)) => to_cbhw(&dx, b, c, hw),
                            None => dx,
                        };
                    }
                }
                _ => unreachable!("cache kind always matches its layer"),
            }
        }
        grad.into()
    }
}

fn mask_relu<F: Real>(g: &mut [F], out: &[F]) {
    for (gv, &o) in g.iter_mut().zip(out) {
        if o <= F::zero() {
            *gv = F::zero();
        }
    }
}

/// (B, C, HW) -> (C, B, HW)
fn to_cbhw<F: Real>(x: &[F], b: usize, c: usize, hw: usize) -> Vec<F> {
    let mut out = vec![F::zero(); x.len()];
    for bi in 0..b {
        for ci in 0..c {
            let src = (bi * c + ci) * hw;
            let dst = (ci * b + bi) * hw;
            out[dst..dst + hw].copy_from_slice(&x[src..src + hw]);
        }
    }
    out
}

/// (C, B, HW) -> (B, C, HW)
fn from_cbhw<F: Real>(x: &[F], b: usize, c: usize, hw: usize) -> Vec<F> {
    let mut out = vec![F::zero(); x.len()];
    for ci in 0..c {
        for bi in 0..b {
            let src = (ci * b + bi) * hw;
            let dst = (bi * c + ci) * hw;
            out[dst..dst + hw].copy_from_slice(&x[src..src + hw]);
        }
    }
    out
}

/// Unfolds a (C, B, H, W) tensor into a (C*K*K, B*OH*OW) patch matrix.
#[allow(clippy::too_many_arguments)]
fn im2col<F: Real>(
    x: &[F],
    c: usize,
    b: usize,
    h: usize,
    w: usize,
    k: usize,
    oh: usize,
    ow: usize,
) -> Vec<F> {
    let n = b * oh * ow;
    let mut cols = vec![F::zero(); c * k * k * n];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst_row = &mut cols[row * n..(row + 1) * n];
                for bi in 0..b {
                    for oy in 0..oh {
                        let src = ((ci * b + bi) * h + oy + ky) * w + kx;
                        let dst = (bi * oh + oy) * ow;
                        dst_row[dst..dst + ow].copy_from_slice(&x[src..src + ow]);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: folds patch gradients back into a (C, B, H, W) tensor.
#[allow(clippy::too_many_arguments)]
fn col2im<F: Real>(
    cols: &[F],
    c: usize,
    b: usize,
    h: usize,
    w: usize,
    k: usize,
    oh: usize,
    ow: usize,
) -> Vec<F> {
    let n = b * oh * ow;
    let mut x = vec![F::zero(); c * b * h * w];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src_row = &cols[row * n..(row + 1) * n];
                for bi in 0..b {
                    for oy in 0..oh {
                        let dst = ((ci * b + bi) * h + oy + ky) * w + kx;
                        let src = (bi * oh + oy) * ow;
                        for (xv, &cv) in x[dst..dst + ow].iter_mut().zip(&src_row[src..src + ow]) {
                            *xv = *xv + cv;
                        }
                    }
                }
            }
        }
    }
    x
}
