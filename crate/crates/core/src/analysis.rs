//! Metrics over finished runs and the 2-D PCA view of the global-model
//! trajectory.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federated::RoundRecord;
use crate::nn::ParamVector;

pub const DEFAULT_WINDOW: usize = 20;

/// First round whose test accuracy reaches `threshold`.
pub fn rounds_to_accuracy(records: &[RoundRecord], threshold: f64) -> Option<usize> {
    records
        .iter()
        .find(|r| r.test_accuracy >= threshold)
        .map(|r| r.round)
}

/// Mean test accuracy over the last `window` rounds.
pub fn converged_accuracy(records: &[RoundRecord], window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::config("convergence window must be at least 1"));
    }
    if window > records.len() {
        return Err(Error::config(format!(
            "convergence window {window} exceeds the {} recorded rounds",
            records.len()
        )));
    }
    let tail = &records[records.len() - window..];
    Ok(tail.iter().map(|r| r.test_accuracy).sum::<f64>() / window as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRound {
    pub threshold: f64,
    pub round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub variant: String,
    pub seed: u64,
    pub rounds: usize,
    pub rounds_to_threshold: Vec<ThresholdRound>,
    pub window: usize,
    pub converged_accuracy: f64,
    pub final_accuracy: f64,
    pub accuracy_curve: Vec<f64>,
}

impl ExperimentSummary {
    pub fn from_records(
        variant: impl Into<String>,
        seed: u64,
        records: &[RoundRecord],
        thresholds: &[f64],
        window: usize,
    ) -> Result<Self> {
        let last = records
            .last()
            .ok_or_else(|| Error::config("cannot summarize a run with no rounds"))?;
        let mut thresholds = thresholds.to_vec();
        thresholds.sort_by(f64::total_cmp);
        Ok(ExperimentSummary {
            variant: variant.into(),
            seed,
            rounds: records.len(),
            rounds_to_threshold: thresholds
                .iter()
                .map(|&threshold| ThresholdRound {
                    threshold,
                    round: rounds_to_accuracy(records, threshold),
                })
                .collect(),
            window: window.min(records.len()),
            converged_accuracy: converged_accuracy(records, window.min(records.len()))?,
            final_accuracy: last.test_accuracy,
            accuracy_curve: records.iter().map(|r| r.test_accuracy).collect(),
        })
    }

    pub fn round_for(&self, threshold: f64) -> Option<usize> {
        self.rounds_to_threshold
            .iter()
            .find(|t| t.threshold == threshold)
            .and_then(|t| t.round)
    }
}

/// Relative saving in rounds of `te` against `base`: 0.2 means 20% fewer.
/// Absent when either run never reached the threshold.
pub fn round_reduction(base: Option<usize>, te: Option<usize>) -> Option<f64> {
    let (b, t) = (base?, te?);
    Some((b as f64 - t as f64) / b as f64)
}

/// Median of per-seed rounds, counting "never reached" as larger than any
/// round. Absent when the median itself was never reached.
pub fn median_rounds(rounds: &[Option<usize>]) -> Option<usize> {
    if rounds.is_empty() {
        return None;
    }
    let mut keyed: Vec<usize> = rounds.iter().map(|r| r.unwrap_or(usize::MAX)).collect();
    keyed.sort_unstable();
    let n = keyed.len();
    let mid = if n % 2 == 1 {
        keyed[n / 2]
    } else {
        let (a, b) = (keyed[n / 2 - 1], keyed[n / 2]);
        if b == usize::MAX {
            usize::MAX
        } else {
            // Rounded up so an even-sized median is still a round number.
            (a + b).div_ceil(2)
        }
    };
    (mid != usize::MAX).then_some(mid)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub round: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory2D {
    pub points: Vec<TrajectoryPoint>,
    pub explained_variance_ratio: [f64; 2],
    /// The two unit principal directions in parameter space.
    pub components: [Vec<f64>; 2],
}

/// Eigenvalues at or below this fraction of the total variance are treated
/// as zero.
const RANK_TOL: f64 = 1e-12;

/// Projects the mean-centred model history onto its top two principal
/// directions. `rounds[i]` labels `models[i]`.
///
/// The decomposition runs on the `T x T` Gram matrix of the history, so the
/// cost is linear in the parameter count. Each direction's sign is chosen so
/// that its first non-negligible entry is positive.
pub fn pca_trajectory(rounds: &[usize], models: &[ParamVector]) -> Result<Trajectory2D> {
    let t = models.len();
    if t < 3 {
        return Err(Error::config(format!("PCA needs at least 3 models, got {t}")));
    }
    if rounds.len() != t {
        return Err(Error::config("one round label is needed per model"));
    }
    let p = models[0].len();
    if p < 2 {
        return Err(Error::config("PCA needs at least 2 parameters"));
    }
    for m in models {
        m.check_len(p, "trajectory model")?;
    }

    let mut mean = vec![0.0f64; p];
    for m in models {
        for (a, &v) in mean.iter_mut().zip(m.iter()) {
            *a += v as f64;
        }
    }
    mean.iter_mut().for_each(|a| *a /= t as f64);
    let centred: Vec<Vec<f64>> = models
        .iter()
        .map(|m| m.iter().zip(&mean).map(|(&v, &mu)| v as f64 - mu).collect())
        .collect();

    let gram = DMatrix::from_fn(t, t, |i, j| dot(&centred[i], &centred[j]));
    let total: f64 = (0..t).map(|i| gram[(i, i)]).sum();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut ratios = [0.0; 2];
    for (slot, &k) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[k].max(0.0);
        if total <= 0.0 || lambda <= RANK_TOL * total {
            break;
        }
        let u = eig.eigenvectors.column(k);
        let mut v = vec![0.0f64; p];
        for (i, row) in centred.iter().enumerate() {
            for (a, &x) in v.iter_mut().zip(row) {
                *a += u[i] * x;
            }
        }
        normalize(&mut v);
        ratios[slot] = lambda / total;
        components.push(v);
    }
    // Rank-deficient histories: complete the basis with directions the data
    // has no variance along.
    let mut basis = 0;
    while components.len() < 2 {
        let mut v = vec![0.0f64; p];
        v[basis] = 1.0;
        basis += 1;
        for c in &components {
            let d = dot(&v, c);
            v.iter_mut().zip(c).for_each(|(a, &b)| *a -= d * b);
        }
        if dot(&v, &v).sqrt() > 1e-6 {
            normalize(&mut v);
            components.push(v);
        }
    }
    for c in components.iter_mut() {
        fix_sign(c);
    }

    let points = centred
        .iter()
        .zip(rounds)
        .map(|(row, &round)| TrajectoryPoint {
            round,
            x: dot(row, &components[0]),
            y: dot(row, &components[1]),
        })
        .collect();
    let [c0, c1]: [Vec<f64>; 2] = components.try_into().expect("exactly two components");
    Ok(Trajectory2D {
        points,
        explained_variance_ratio: ratios,
        components: [c0, c1],
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|a| *a /= n);
}

fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if let Some(first) = v.iter().find(|a| a.abs() > 1e-9 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
    }
}
