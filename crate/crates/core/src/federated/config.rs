use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::PartitionConfig;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Which constraint the clients train under, and what it anchors to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum AlgorithmVariant {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedprox")]
    FedProx { alpha: f64 },
    #[serde(rename = "fedcl")]
    FedCl { alpha: f64 },
    #[serde(rename = "fedprox-te")]
    FedProxTe { alpha: f64, beta: f64 },
    #[serde(rename = "fedcl-te")]
    FedClTe { alpha: f64, beta: f64 },
}

/// The variant names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantKind {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedprox")]
    FedProx,
    #[serde(rename = "fedcl")]
    FedCl,
    #[serde(rename = "fedprox-te")]
    FedProxTe,
    #[serde(rename = "fedcl-te")]
    FedClTe,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] = [
        VariantKind::FedAvg,
        VariantKind::FedProx,
        VariantKind::FedCl,
        VariantKind::FedProxTe,
        VariantKind::FedClTe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::FedAvg => "fedavg",
            VariantKind::FedProx => "fedprox",
            VariantKind::FedCl => "fedcl",
            VariantKind::FedProxTe => "fedprox-te",
            VariantKind::FedClTe => "fedcl-te",
        }
    }

    /// The variant a "-TE" variant modifies.
    pub fn base(self) -> Option<VariantKind> {
        match self {
            VariantKind::FedProxTe => Some(VariantKind::FedProx),
            VariantKind::FedClTe => Some(VariantKind::FedCl),
            _ => None,
        }
    }

    pub fn with(self, alpha: f64, beta: f64) -> AlgorithmVariant {
        match self {
            VariantKind::FedAvg => AlgorithmVariant::FedAvg,
            VariantKind::FedProx => AlgorithmVariant::FedProx { alpha },
            VariantKind::FedCl => AlgorithmVariant::FedCl { alpha },
            VariantKind::FedProxTe => AlgorithmVariant::FedProxTe { alpha, beta },
            VariantKind::FedClTe => AlgorithmVariant::FedClTe { alpha, beta },
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown variant {s:?}; expected one of fedavg, fedprox, fedcl, fedprox-te, fedcl-te"
                ))
            })
    }
}

impl AlgorithmVariant {
    pub fn kind(&self) -> VariantKind {
        match self {
            AlgorithmVariant::FedAvg => VariantKind::FedAvg,
            AlgorithmVariant::FedProx { .. } => VariantKind::FedProx,
            AlgorithmVariant::FedCl { .. } => VariantKind::FedCl,
            AlgorithmVariant::FedProxTe { .. } => VariantKind::FedProxTe,
            AlgorithmVariant::FedClTe { .. } => VariantKind::FedClTe,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            AlgorithmVariant::FedAvg => 0.0,
            AlgorithmVariant::FedProx { alpha }
            | AlgorithmVariant::FedCl { alpha }
            | AlgorithmVariant::FedProxTe { alpha, .. }
            | AlgorithmVariant::FedClTe { alpha, .. } => alpha,
        }
    }

    /// Ensemble momentum, for the "-TE" variants.
    pub fn beta(&self) -> Option<f64> {
        match *self {
            AlgorithmVariant::FedProxTe { beta, .. } | AlgorithmVariant::FedClTe { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn uses_fisher(&self) -> bool {
        matches!(self, AlgorithmVariant::FedCl { .. } | AlgorithmVariant::FedClTe { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.alpha();
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if let Some(beta) = self.beta() {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::config(format!("beta must be in [0, 1), got {beta}")));
            }
        }
        Ok(())
    }
}

/// How the server obtains the Fisher diagonal for the FedCL penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FisherEstimate {
    /// Empirical Fisher on at most `max_samples` proxy examples.
    Empirical { max_samples: usize },
    /// All-ones diagonal, which turns the Fisher penalty into the proximal one.
    Unit,
}

impl Default for FisherEstimate {
    fn default() -> Self {
        FisherEstimate::Empirical { max_samples: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    pub clients: usize,
    /// Fraction of clients selected per round.
    pub ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub lr: f64,
    /// Per-round multiplicative learning-rate decay.
    pub lr_decay: f64,
    pub seed: u64,
    pub variant: AlgorithmVariant,
    /// Dirichlet concentration of the client class distributions.
    pub gamma: f64,
    /// Global class prior; `None` uses the training set's class frequencies.
    pub prior: Option<Vec<f64>>,
    /// Share of the training set held out at the server as the proxy set.
    /// Zero disables the split (not allowed with an empirical Fisher).
    pub proxy_fraction: f64,
    pub fisher: FisherEstimate,
    /// Keep every n-th global model in the round records (0 keeps none).
    pub trajectory_stride: usize,
    pub eval_batch_size: usize,
    /// Train the selected clients of a round on separate threads.
    pub parallel_clients: bool,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            clients: 10,
            ratio: 0.2,
            epochs: 2,
            batch_size: 50,
            rounds: 100,
            lr: 0.005,
            lr_decay: 0.99,
            seed: 1,
            variant: AlgorithmVariant::FedAvg,
            gamma: 1.0,
            prior: None,
            proxy_fraction: 0.01,
            fisher: FisherEstimate::default(),
            trajectory_stride: 0,
            eval_batch_size: 500,
            parallel_clients: false,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        let fail = |m: String| Err(Error::Config(m));
        if self.clients == 0 {
            return fail("clients must be >= 1".into());
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return fail(format!("selection ratio must be in (0, 1], got {}", self.ratio));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.rounds == 0 || self.eval_batch_size == 0 {
            return fail("epochs, batch size, rounds and eval batch size must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("learning rate must be > 0, got {}", self.lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail(format!("learning-rate decay must be in (0, 1], got {}", self.lr_decay));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(0.0..1.0).contains(&self.proxy_fraction) {
            return fail(format!("proxy fraction must be in [0, 1), got {}", self.proxy_fraction));
        }
        if self.variant.uses_fisher()
            && matches!(self.fisher, FisherEstimate::Empirical { .. })
            && self.proxy_fraction == 0.0
        {
            return fail("an empirical Fisher estimate needs a proxy set (proxy_fraction > 0)".into());
        }
        Ok(())
    }

    /// Clients selected per round: `max(floor(ratio * clients), 1)`.
    pub fn clients_per_round(&self) -> usize {
        clients_per_round(self.clients, self.ratio)
    }

    pub fn partition(&self) -> PartitionConfig {
        PartitionConfig {
            clients: self.clients,
            gamma: self.gamma,
            prior: self.prior.clone(),
            seed: seed::derive(self.seed, Stream::Partition, &[]),
        }
    }
}

pub(crate) fn clients_per_round(clients: usize, ratio: f64) -> usize {
    // The epsilon keeps products like 0.29 * 100 = 28.999... on the intended integer.
    ((ratio * clients as f64 + 1e-9).floor() as usize).clamp(1, clients)
}
