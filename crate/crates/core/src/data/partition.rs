use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// One client's local data: indices into a shared [`Dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientShard {
    pub client_id: usize,
    /// Sorted ascending, unique.
    pub indices: Vec<usize>,
    pub label_histogram: Vec<usize>,
}

impl ClientShard {
    pub fn new(client_id: usize, mut indices: Vec<usize>, ds: &Dataset) -> Self {
        indices.sort_unstable();
        indices.dedup();
        let label_histogram = ds.label_histogram(indices.iter().copied());
        ClientShard {
            client_id,
            indices,
            label_histogram,
        }
    }

    /// The shard holding every example of `ds`.
    pub fn whole(ds: &Dataset) -> Self {
        ClientShard::new(0, (0..ds.len()).collect(), ds)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Normalized label histogram.
    pub fn class_distribution(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        self.label_histogram.iter().map(|&c| c as f64 / n).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub clients: usize,
    /// Dirichlet concentration; larger is closer to IID.
    pub gamma: f64,
    /// Global class prior. `None` uses the dataset's empirical distribution.
    pub prior: Option<Vec<f64>>,
    pub seed: u64,
}

impl PartitionConfig {
    fn resolved_prior(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let p = match &self.prior {
            Some(p) => p.clone(),
            None => return Ok(ds.class_distribution()),
        };
        if p.len() != ds.classes() {
            return Err(Error::config(format!(
                "class prior has {} entries, dataset has {} classes",
                p.len(),
                ds.classes()
            )));
        }
        if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::config("class prior entries must be finite and >= 0"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::config(format!("class prior sums to {sum}, not 1")));
        }
        Ok(p)
    }
}

/// Draws `q ~ Dir(gamma * prior)`.
fn sample_dirichlet(rng: &mut Rng, gamma: f64, prior: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = prior
        .iter()
        .map(|&p| {
            if p > 0.0 {
                Gamma::new(gamma * p, 1.0)
                    .expect("positive shape")
                    .sample(rng)
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = q.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        q.iter_mut().for_each(|v| *v /= sum);
    } else {
        // Every gamma draw underflowed (tiny concentration): the limit of the
        // Dirichlet is a one-hot vector, with the hot class distributed as the prior.
        let mut u = rng.random::<f64>();
        let mut hot = prior.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (c, &p) in prior.iter().enumerate() {
            if u < p {
                hot = c;
                break;
            }
            u -= p;
        }
        q.iter_mut().for_each(|v| *v = 0.0);
        q[hot] = 1.0;
    }
    q
}

/// Splits `total` items in proportion to `weights` with largest-remainder
/// rounding. Ties go to the lower index. Zero total weight splits evenly.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| total as f64 * w / sum).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Non-IID split of `ds` across `cfg.clients` clients.
///
/// Every client draws a class distribution `q_k ~ Dir(gamma * p)`. Each
/// class's examples are then shuffled and divided among the clients in
/// proportion to their weights `q_k[c]` for that class (largest-remainder
/// rounding). A final pass moves one example from the largest shard into any
/// shard left empty.
pub fn dirichlet_partition(ds: &Dataset, cfg: &PartitionConfig) -> Result<Vec<ClientShard>> {
    let k = cfg.clients;
    if k == 0 {
        return Err(Error::config("partition needs at least one client"));
    }
    if k > ds.len() {
        return Err(Error::config(format!(
            "{k} clients but only {} examples",
            ds.len()
        )));
    }
    if !cfg.gamma.is_finite() || cfg.gamma <= 0.0 {
        return Err(Error::config(format!("dirichlet concentration must be > 0, got {}", cfg.gamma)));
    }
    let prior = cfg.resolved_prior(ds)?;
    let mut rng = seed::rng(cfg.seed);

    let q: Vec<Vec<f64>> = (0..k).map(|_| sample_dirichlet(&mut rng, cfg.gamma, &prior)).collect();

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes()];
    for (i, &y) in ds.labels().iter().enumerate() {
        by_class[y as usize].push(i);
    }

    let mut shards: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let weights: Vec<f64> = q.iter().map(|qk| qk[c]).collect();
        let counts = apportion(members.len(), &weights);
        let mut start = 0;
        for (client, &n) in counts.iter().enumerate() {
            shards[client].extend_from_slice(&members[start..start + n]);
            start += n;
        }
    }

    while let Some(empty) = shards.iter().position(|s| s.is_empty()) {
        let largest = (0..k)
            .max_by(|&a, &b| shards[a].len().cmp(&shards[b].len()).then(b.cmp(&a)))
            .expect("k >= 1");
        let moved = shards[largest].pop().expect("k <= N leaves a donor");
        shards[empty].push(moved);
    }

    Ok(shards
        .into_iter()
        .enumerate()
        .map(|(id, idx)| ClientShard::new(id, idx, ds))
        .collect())
}

/// Stratified split into (train, proxy) with `round(fraction * N)` proxy
/// examples apportioned across classes by largest remainder. A present class
/// whose share rounds to zero still contributes one example, so small
/// datasets may get a slightly larger proxy set.
pub fn split_proxy(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!("proxy fraction must be in (0, 1), got {fraction}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes()];
    for (i, &y) in ds.labels().iter().enumerate() {
        by_class[y as usize].push(i);
    }
    let total = (fraction * ds.len() as f64).round() as usize;
    let sizes: Vec<f64> = by_class.iter().map(|m| m.len() as f64).collect();
    let quotas: Vec<usize> = apportion(total, &sizes)
        .into_iter()
        .zip(&by_class)
        .map(|(q, members)| if members.is_empty() { 0 } else { q.max(1) })
        .collect();

    let mut rng = seed::rng(seed);
    let mut proxy_idx = Vec::with_capacity(total);
    for (members, &quota) in by_class.iter_mut().zip(&quotas) {
        members.shuffle(&mut rng);
        proxy_idx.extend_from_slice(&members[..quota.min(members.len())]);
    }
    proxy_idx.sort_unstable();
    let mut in_proxy = vec![false; ds.len()];
    for &i in &proxy_idx {
        in_proxy[i] = true;
    }
    let train_idx: Vec<usize> = (0..ds.len()).filter(|&i| !in_proxy[i]).collect();
    if train_idx.is_empty() {
        return Err(Error::config("proxy split leaves no training examples"));
    }
    Ok((ds.subset(&train_idx)?, ds.subset(&proxy_idx)?))
}
