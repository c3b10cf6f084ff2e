use std::fs::{self, File};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use fedte_core::analysis::{pca_trajectory, ExperimentSummary};
use fedte_core::data::Dataset;
use fedte_core::federated::{run_experiment_with, FedConfig, RoundRecord, VariantKind};
use fedte_core::nn::{ModelSpec, ParamVector};
use serde::{Deserialize, Serialize};

use crate::datasets;
use crate::settings::{DatasetName, Settings};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Settings that must agree for two runs to be comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub dataset: DatasetName,
    pub gamma: f64,
    pub clients: usize,
    pub ratio: f64,
    pub epochs: usize,
    pub batch: usize,
    pub rounds: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub proxy_fraction: f64,
    pub fisher_samples: usize,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub stop_at: Option<f64>,
}

impl From<&Settings> for Family {
    fn from(s: &Settings) -> Self {
        Family {
            dataset: s.dataset,
            gamma: s.gamma,
            clients: s.clients,
            ratio: s.ratio,
            epochs: s.epochs,
            batch: s.batch,
            rounds: s.rounds,
            lr: s.lr,
            lr_decay: s.lr_decay,
            proxy_fraction: s.proxy_fraction,
            fisher_samples: s.fisher_samples,
            train_limit: s.train_limit,
            test_limit: s.test_limit,
            stop_at: s.stop_at,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: VariantKind,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub family: Family,
    pub summary: ExperimentSummary,
    pub explained_variance_ratio: Option<[f64; 2]>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFiles {
    pub metrics: PathBuf,
    pub summary: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub manifest: PathBuf,
}

/// Contents of `manifest.json`. `settings` alone reproduces the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub settings: Settings,
    pub fed_config: FedConfig,
    pub started: String,
    pub finished: String,
    pub status: String,
    pub files: OutputFiles,
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    round: usize,
    selected_clients: &'a str,
    test_accuracy: f64,
    test_loss: f64,
    lr: f64,
}

/// Streams round records to `metrics.csv`, flushing every row so a run
/// that dies midway leaves the rounds it finished on disk.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
    path: PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let inner = csv::Writer::from_path(path).with_context(|| format!("failed to create {}", path.display()))?;
        Ok(MetricsWriter {
            inner,
            path: path.to_path_buf(),
        })
    }

    pub fn write(&mut self, r: &RoundRecord) -> Result<()> {
        let clients: Vec<String> = r.selected_clients.iter().map(|c| c.to_string()).collect();
        self.inner
            .serialize(MetricsRow {
                round: r.round,
                selected_clients: &clients.join(";"),
                test_accuracy: r.test_accuracy,
                test_loss: r.test_loss,
                lr: r.lr,
            })
            .and_then(|_| self.inner.flush().map_err(Into::into))
            .with_context(|| format!("failed to write {}", self.path.display()))
    }
}

pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
}

/// Runs every (variant, seed) pair in `settings`.
pub fn execute(settings: &Settings, log: bool) -> Result<Vec<RunOutcome>> {
    let (train, test) = datasets::load(&settings.data_dir, settings.dataset, settings.train_limit, settings.test_limit)?;
    let spec = ModelSpec::default_cnn(train.shape(), train.classes())?;
    let jobs: Vec<(VariantKind, u64)> = settings
        .variants
        .iter()
        .flat_map(|&v| settings.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let one = |&(kind, seed): &(VariantKind, u64)| {
        run_one(settings, kind, seed, &spec, &train, &test, log)
            .with_context(|| format!("run {} with seed {seed} failed", kind.name()))
    };
    if settings.parallel && jobs.len() > 1 {
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs.iter().map(|j| s.spawn(move || one(j))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("run thread panicked"))
                .collect()
        })
    } else {
        jobs.iter().map(one).collect()
    }
}

pub fn run_one(
    settings: &Settings,
    kind: VariantKind,
    seed: u64,
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    log: bool,
) -> Result<RunOutcome> {
    let single = settings.single(kind, seed);
    let cfg = single.fed_config(kind, seed);
    let dir = settings.run_dir(kind, seed);
    fs::create_dir_all(&dir).with_context(|| format!("failed to create {}", dir.display()))?;
    let mut files = OutputFiles {
        metrics: dir.join(METRICS_FILE),
        summary: None,
        trajectory: None,
        manifest: dir.join(MANIFEST_FILE),
    };
    let started = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();

    let mut metrics = MetricsWriter::create(&files.metrics)?;
    let mut records: Vec<RoundRecord> = Vec::with_capacity(cfg.rounds);
    let mut models: Vec<(usize, ParamVector)> = Vec::new();
    let result = run_experiment_with(&cfg, spec, train, test, |r| {
        metrics
            .write(r)
            .map_err(|e| fedte_core::Error::Internal(format!("{e:#}")))?;
        if log {
            eprintln!(
                "{} seed {seed} round {:>4}: accuracy {:.4}, loss {:.4}",
                kind.name(),
                r.round,
                r.test_accuracy,
                r.test_loss
            );
        }
        let mut r = r.clone();
        if let Some(m) = r.global_model.take() {
            models.push((r.round, m));
        }
        let done = settings.stop_at.is_some_and(|t| r.test_accuracy >= t);
        records.push(r);
        Ok(if done {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        })
    });
    drop(metrics);

    let finish = |files: OutputFiles, status: String| -> Result<()> {
        let manifest = RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            settings: single.clone(),
            fed_config: cfg.clone(),
            started: started.clone(),
            finished: chrono::Utc::now().to_rfc3339(),
            status,
            files,
        };
        write_json(&dir.join(MANIFEST_FILE), &manifest)
    };
    if let Err(e) = result {
        finish(files, format!("failed: {e}"))?;
        return Err(e.into());
    }

    let mut explained = None;
    if settings.save_trajectory {
        if models.len() >= 3 {
            let (rounds, params): (Vec<usize>, Vec<ParamVector>) = models.into_iter().unzip();
            let tr = pca_trajectory(&rounds, &params)?;
            let path = dir.join(TRAJECTORY_FILE);
            let mut w =
                csv::Writer::from_path(&path).with_context(|| format!("failed to create {}", path.display()))?;
            for p in &tr.points {
                w.serialize(p)?;
            }
            w.flush()?;
            explained = Some(tr.explained_variance_ratio);
            files.trajectory = Some(path);
        } else if log {
            eprintln!("fewer than 3 stored models; skipping the trajectory");
        }
    }

    let (alpha, beta) = settings.alpha_beta(kind);
    let summary = RunSummary {
        variant: kind,
        alpha,
        beta,
        seed,
        family: Family::from(settings),
        summary: ExperimentSummary::from_records(kind.name(), seed, &records, &settings.thresholds, settings.window)?,
        explained_variance_ratio: explained,
        seconds: clock.elapsed().as_secs_f64(),
    };
    let summary_path = dir.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;
    files.summary = Some(summary_path);
    finish(files, "completed".into())?;
    Ok(RunOutcome { dir, summary })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("failed to write {}", path.display()))
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path).with_context(|| format!("failed to read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("failed to parse {}", path.display()))
}
