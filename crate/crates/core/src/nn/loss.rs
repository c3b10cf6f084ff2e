use super::real::Real;

/// Row-major (batch x classes) matrix of pre-softmax scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits<F = f32> {
    pub(crate) data: Vec<F>,
    pub(crate) classes: usize,
}

impl<F: Real> Logits<F> {
    pub fn rows(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn softmax(&self) -> Vec<Vec<F>> {
        (0..self.rows()).map(|i| softmax(self.row(i))).collect()
    }

    /// Index of the largest logit in row `i`; ties resolve to the lowest class.
    pub fn argmax(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        best
    }
}

pub fn softmax<F: Real>(row: &[F]) -> Vec<F> {
    let m = row.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = row.iter().map(|&z| (z - m).exp()).collect();
    let sum: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy over the batch and its gradient with respect to the
/// logits. The loss is accumulated in f64.
pub(crate) fn softmax_cross_entropy<F: Real>(logits: &Logits<F>, labels: &[usize]) -> (f64, Vec<F>) {
    let k = logits.classes;
    let b = labels.len();
    let inv_b = F::from_f64(1.0 / b as f64);
    let mut grad = vec![F::zero(); logits.data.len()];
    let mut total = 0.0f64;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let m = row.iter().copied().fold(F::neg_infinity(), F::max);
        let sum: F = row.iter().map(|&z| (z - m).exp()).sum();
        let lse = m + sum.ln();
        total += (lse - row[y]).widen();
        let g = &mut grad[i * k..(i + 1) * k];
        for (j, gj) in g.iter_mut().enumerate() {
            let p = (row[j] - lse).exp();
            let target = if j == y { F::one() } else { F::zero() };
            *gj = (p - target) * inv_b;
        }
    }
    (total / b as f64, grad)
}
