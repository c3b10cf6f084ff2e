//! Run settings: a flat TOML file (or the `settings` block of a run
//! manifest) overlaid with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use fedte_core::federated::{FedConfig, FisherEstimate, VariantKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Mnist,
    Fashion,
    Cifar10,
}

impl DatasetName {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::Fashion => "fashion",
            DatasetName::Cifar10 => "cifar10",
        }
    }

    /// Dirichlet concentration used for this dataset unless overridden.
    pub fn default_gamma(self) -> f64 {
        match self {
            DatasetName::Cifar10 => 10.0,
            _ => 1.0,
        }
    }

    /// Tuned `(alpha, beta)` for a variant on this dataset.
    pub fn default_alpha_beta(self, kind: VariantKind) -> (f64, f64) {
        use DatasetName::*;
        match (kind.base().unwrap_or(kind), self) {
            (VariantKind::FedAvg, _) => (0.0, 0.0),
            (VariantKind::FedProx, Mnist | Fashion) => (1.0, 0.2),
            (VariantKind::FedProx, Cifar10) => (0.4, 0.4),
            (_, Fashion) => (0.1, 0.6),
            (_, Mnist | Cifar10) => (0.1, 0.2),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion" | "fashion-mnist" | "fashionmnist" => Ok(DatasetName::Fashion),
            "cifar10" | "cifar-10" => Ok(DatasetName::Cifar10),
            _ => bail!("unknown dataset {s:?}; expected mnist, fashion or cifar10"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Every key is optional; missing keys fall back to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub dataset: Option<DatasetName>,
    pub data_dir: Option<PathBuf>,
    pub variant: Option<OneOrMany<String>>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub clients: Option<usize>,
    pub ratio: Option<f64>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub rounds: Option<usize>,
    pub lr: Option<f64>,
    pub lr_decay: Option<f64>,
    pub seed: Option<OneOrMany<u64>>,
    pub proxy_fraction: Option<f64>,
    pub fisher_samples: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub save_trajectory: Option<bool>,
    pub traj_stride: Option<usize>,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub thresholds: Option<Vec<f64>>,
    pub window: Option<usize>,
    pub parallel: Option<bool>,
    pub parallel_clients: Option<bool>,
    pub stop_at: Option<f64>,
}

impl Overrides {
    /// Values set in `top` win.
    pub fn overlay(self, top: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: top.$f.or(self.$f)),* } };
        }
        pick!(
            dataset,
            data_dir,
            variant,
            alpha,
            beta,
            gamma,
            clients,
            ratio,
            epochs,
            batch,
            rounds,
            lr,
            lr_decay,
            seed,
            proxy_fraction,
            fisher_samples,
            out_dir,
            save_trajectory,
            traj_stride,
            train_limit,
            test_limit,
            thresholds,
            window,
            parallel,
            parallel_clients,
            stop_at
        )
    }

    /// Reads a flat TOML settings file, or the `settings` block of a
    /// `manifest.json` written by an earlier run.
    pub fn from_file(path: &Path) -> Result<Overrides> {
        let text = std::fs::read_to_string(path).with_context(|| format!("failed to read {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct ManifestSettings {
                settings: Settings,
            }
            let m: ManifestSettings =
                serde_json::from_str(&text).with_context(|| format!("failed to parse {}", path.display()))?;
            return Ok(m.settings.into());
        }
        toml::from_str(&text).with_context(|| format!("failed to parse {}", path.display()))
    }
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub dataset: DatasetName,
    pub data_dir: PathBuf,
    pub variants: Vec<VariantKind>,
    /// `None` picks the tuned value for the dataset and variant.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: f64,
    pub clients: usize,
    pub ratio: f64,
    pub epochs: usize,
    pub batch: usize,
    pub rounds: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub seeds: Vec<u64>,
    pub proxy_fraction: f64,
    /// Proxy examples used for the Fisher estimate; 0 uses an all-ones Fisher.
    pub fisher_samples: usize,
    pub out_dir: PathBuf,
    pub save_trajectory: bool,
    pub traj_stride: usize,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub thresholds: Vec<f64>,
    pub window: usize,
    pub parallel: bool,
    pub parallel_clients: bool,
    /// End a run early once its test accuracy reaches this value.
    pub stop_at: Option<f64>,
}

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.8, 0.9, 0.95];

impl TryFrom<Overrides> for Settings {
    type Error = anyhow::Error;

    fn try_from(o: Overrides) -> Result<Settings> {
        let dataset = o.dataset.unwrap_or(DatasetName::Mnist);
        let d = FedConfig::default();
        let variants = match o.variant {
            None => vec![VariantKind::FedAvg],
            Some(v) => v
                .into_vec()
                .iter()
                .map(|s| s.parse::<VariantKind>())
                .collect::<Result<Vec<_>, _>>()?,
        };
        let seeds = o.seed.map(OneOrMany::into_vec).unwrap_or_else(|| vec![d.seed]);
        if variants.is_empty() || seeds.is_empty() {
            bail!("at least one variant and one seed are required");
        }
        let thresholds = o.thresholds.unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
        if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            bail!("accuracy threshold {t} is outside [0, 1]");
        }
        let s = Settings {
            dataset,
            data_dir: o.data_dir.unwrap_or_else(|| PathBuf::from("data")),
            variants,
            alpha: o.alpha,
            beta: o.beta,
            gamma: o.gamma.unwrap_or_else(|| dataset.default_gamma()),
            clients: o.clients.unwrap_or(d.clients),
            ratio: o.ratio.unwrap_or(d.ratio),
            epochs: o.epochs.unwrap_or(d.epochs),
            batch: o.batch.unwrap_or(d.batch_size),
            rounds: o.rounds.unwrap_or(d.rounds),
            lr: o.lr.unwrap_or(d.lr),
            lr_decay: o.lr_decay.unwrap_or(d.lr_decay),
            seeds,
            proxy_fraction: o.proxy_fraction.unwrap_or(d.proxy_fraction),
            fisher_samples: o.fisher_samples.unwrap_or(match d.fisher {
                FisherEstimate::Empirical { max_samples } => max_samples,
                FisherEstimate::Unit => 0,
            }),
            out_dir: o.out_dir.unwrap_or_else(|| PathBuf::from("runs")),
            save_trajectory: o.save_trajectory.unwrap_or(false),
            traj_stride: o.traj_stride.unwrap_or(1),
            train_limit: o.train_limit,
            test_limit: o.test_limit,
            thresholds,
            window: o.window.unwrap_or(fedte_core::analysis::DEFAULT_WINDOW),
            parallel: o.parallel.unwrap_or(false),
            parallel_clients: o.parallel_clients.unwrap_or(false),
            stop_at: o.stop_at,
        };
        if s.traj_stride == 0 {
            bail!("traj_stride must be >= 1");
        }
        if s.window == 0 {
            bail!("window must be >= 1");
        }
        for v in &s.variants {
            s.fed_config(*v, s.seeds[0]).validate()?;
        }
        Ok(s)
    }
}

impl From<Settings> for Overrides {
    fn from(s: Settings) -> Overrides {
        Overrides {
            dataset: Some(s.dataset),
            data_dir: Some(s.data_dir),
            variant: Some(OneOrMany::Many(s.variants.iter().map(|v| v.name().to_string()).collect())),
            alpha: s.alpha,
            beta: s.beta,
            gamma: Some(s.gamma),
            clients: Some(s.clients),
            ratio: Some(s.ratio),
            epochs: Some(s.epochs),
            batch: Some(s.batch),
            rounds: Some(s.rounds),
            lr: Some(s.lr),
            lr_decay: Some(s.lr_decay),
            seed: Some(OneOrMany::Many(s.seeds)),
            proxy_fraction: Some(s.proxy_fraction),
            fisher_samples: Some(s.fisher_samples),
            out_dir: Some(s.out_dir),
            save_trajectory: Some(s.save_trajectory),
            traj_stride: Some(s.traj_stride),
            train_limit: s.train_limit,
            test_limit: s.test_limit,
            thresholds: Some(s.thresholds),
            window: Some(s.window),
            parallel: Some(s.parallel),
            parallel_clients: Some(s.parallel_clients),
            stop_at: s.stop_at,
        }
    }
}

impl Settings {
    pub fn alpha_beta(&self, kind: VariantKind) -> (f64, f64) {
        let (a, b) = self.dataset.default_alpha_beta(kind);
        (self.alpha.unwrap_or(a), self.beta.unwrap_or(b))
    }

    pub fn fed_config(&self, kind: VariantKind, seed: u64) -> FedConfig {
        let (alpha, beta) = self.alpha_beta(kind);
        FedConfig {
            clients: self.clients,
            ratio: self.ratio,
            epochs: self.epochs,
            batch_size: self.batch,
            rounds: self.rounds,
            lr: self.lr,
            lr_decay: self.lr_decay,
            seed,
            variant: kind.with(alpha, beta),
            gamma: self.gamma,
            prior: None,
            proxy_fraction: self.proxy_fraction,
            fisher: if self.fisher_samples == 0 {
                FisherEstimate::Unit
            } else {
                FisherEstimate::Empirical {
                    max_samples: self.fisher_samples,
                }
            },
            trajectory_stride: if self.save_trajectory { self.traj_stride } else { 0 },
            eval_batch_size: FedConfig::default().eval_batch_size,
            parallel_clients: self.parallel_clients,
        }
    }

    /// The settings of a single (variant, seed) run with every tuned value
    /// written out, as echoed into its manifest.
    pub fn single(&self, kind: VariantKind, seed: u64) -> Settings {
        let (alpha, beta) = self.alpha_beta(kind);
        Settings {
            variants: vec![kind],
            seeds: vec![seed],
            alpha: Some(alpha),
            beta: Some(beta),
            ..self.clone()
        }
    }

    pub fn run_dir(&self, kind: VariantKind, seed: u64) -> PathBuf {
        self.out_dir.join(format!("{}-seed{}", kind.name(), seed))
    }
}
