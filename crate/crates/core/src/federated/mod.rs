//! The federated training loop.
//!
//! Each round the server samples clients, hands every one of them the
//! current global model together with a penalty term, averages the returned
//! models weighted by local sample counts, and evaluates the result on the
//! test set. For the "-TE" variants the penalty anchors to the ensemble
//! target maintained by [`TargetTracker`], which is updated right after each
//! aggregation and first used in the following round; round 1 anchors to the
//! initial model.

mod config;

pub use config::{AlgorithmVariant, FedConfig, FisherEstimate, VariantKind};

use std::ops::ControlFlow;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{dirichlet_partition, iterate_batches, split_proxy, ClientShard, Dataset};
use crate::error::{Error, Result};
use crate::nn::{lr_at_round, sgd_step_in_place, ModelSpec, Network, ParamVector};
use crate::penalty::{fisher_diag, PenaltyTerm};
use crate::seed::{self, Stream};
use crate::target::TargetTracker;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub selected_clients: Vec<usize>,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub lr: f64,
    #[serde(skip)]
    pub global_model: Option<ParamVector>,
}

/// Uniformly samples `max(floor(ratio * clients), 1)` distinct clients.
/// The draw depends only on `(seed, round)`, so runs that differ only in
/// their variant select the same clients. Returned in ascending order.
pub fn select_clients(clients: usize, ratio: f64, round: usize, seed: u64) -> Vec<usize> {
    let m = config::clients_per_round(clients, ratio);
    let mut rng = seed::derived_rng(seed, Stream::Selection, &[round as u64]);
    let mut chosen = index::sample(&mut rng, clients, m).into_vec();
    chosen.sort_unstable();
    chosen
}

/// Where a local training run sits in the experiment, for error reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainingContext {
    pub round: usize,
    pub client: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub params: ParamVector,
    /// Number of local examples, the client's aggregation weight.
    pub samples: usize,
    pub steps: usize,
}

/// Epoch `e` of a local run shuffles with this seed.
fn epoch_seed(local_seed: u64, epoch: usize) -> u64 {
    seed::derive(local_seed, Stream::LocalTraining, &[epoch as u64])
}

fn local_seed(run_seed: u64, round: usize, client: usize) -> u64 {
    seed::derive(run_seed, Stream::LocalTraining, &[round as u64, client as u64])
}

/// Mini-batch SGD on one client's shard, starting from `global`, minimizing
/// cross-entropy plus `penalty`.
pub fn local_train(
    spec: &ModelSpec,
    global: &ParamVector,
    ds: &Dataset,
    shard: &ClientShard,
    penalty: &PenaltyTerm,
    opts: LocalTraining,
    ctx: TrainingContext,
) -> Result<LocalOutcome> {
    if !opts.lr.is_finite() || opts.lr <= 0.0 {
        return Err(Error::config(format!("learning rate must be > 0, got {}", opts.lr)));
    }
    if shard.is_empty() {
        return Err(Error::config(format!("client {} has no data", ctx.client)));
    }
    let mut net = Network::with_params(spec.clone(), global.clone())?;
    let lr = opts.lr as f32;
    let mut steps = 0;
    for epoch in 0..opts.epochs {
        for batch in iterate_batches(ds, shard, opts.batch_size, epoch_seed(opts.seed, epoch))? {
            let (_, grad) = net.loss_and_grad(&batch, penalty).map_err(|e| match e {
                Error::NonFiniteLoss(loss) => Error::Divergence {
                    round: ctx.round,
                    client: ctx.client,
                    step: steps,
                    loss,
                },
                other => other,
            })?;
            sgd_step_in_place(net.params_mut(), &grad, lr)?;
            steps += 1;
        }
    }
    Ok(LocalOutcome {
        params: net.into_params(),
        samples: shard.len(),
        steps,
    })
}

/// Sample-count weighted mean of client models, accumulated in f64.
pub fn aggregate(models: &[ParamVector], counts: &[usize]) -> Result<ParamVector> {
    let first = models
        .first()
        .ok_or_else(|| Error::Internal("aggregating an empty set of models".into()))?;
    if models.len() != counts.len() {
        return Err(Error::Internal(format!(
            "{} models but {} sample counts",
            models.len(),
            counts.len()
        )));
    }
    if counts.contains(&0) {
        return Err(Error::Internal("client with zero samples in aggregation".into()));
    }
    let mut acc = vec![0.0f64; first.len()];
    for m in models {
        m.check_len(first.len(), "client model")?;
    }
    for (m, &n) in models.iter().zip(counts) {
        let w = n as f64;
        for (a, &v) in acc.iter_mut().zip(m.iter()) {
            *a += w * v as f64;
        }
    }
    let total: usize = counts.iter().sum();
    let inv = total as f64;
    Ok(acc.into_iter().map(|a| (a / inv) as f32).collect::<Vec<_>>().into())
}

/// Test accuracy and mean cross-entropy.
pub fn evaluate(spec: &ModelSpec, params: &ParamVector, test: &Dataset, batch_size: usize) -> Result<(f64, f64)> {
    let net = Network::with_params(spec.clone(), params.clone())?;
    let mut correct = 0usize;
    let mut loss = 0.0f64;
    let indices: Vec<usize> = (0..test.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let score = net.score(&test.batch(chunk))?;
        correct += score.correct;
        loss += score.loss_sum;
    }
    Ok((correct as f64 / test.len() as f64, loss / test.len() as f64))
}

/// The training set after holding out the server's proxy set.
pub struct PreparedData {
    pub train: Dataset,
    pub proxy: Option<Dataset>,
    pub shards: Vec<ClientShard>,
}

pub fn prepare_data(cfg: &FedConfig, train: &Dataset) -> Result<PreparedData> {
    let (train, proxy) = if cfg.proxy_fraction > 0.0 {
        let (t, p) = split_proxy(train, cfg.proxy_fraction, seed::derive(cfg.seed, Stream::Proxy, &[]))?;
        (t, Some(p))
    } else {
        (train.clone(), None)
    };
    let shards = dirichlet_partition(&train, &cfg.partition())?;
    Ok(PreparedData { train, proxy, shards })
}

/// Initial global model of a run.
pub fn initial_model(spec: &ModelSpec, run_seed: u64) -> ParamVector {
    Network::<f32>::initialized(spec.clone(), seed::derive(run_seed, Stream::Init, &[])).into_params()
}

fn build_penalty(
    cfg: &FedConfig,
    spec: &ModelSpec,
    anchor: &ParamVector,
    proxy: Option<&Dataset>,
    round: usize,
) -> Result<PenaltyTerm> {
    let alpha = cfg.variant.alpha();
    match cfg.variant {
        AlgorithmVariant::FedAvg => Ok(PenaltyTerm::None),
        AlgorithmVariant::FedProx { .. } | AlgorithmVariant::FedProxTe { .. } => {
            PenaltyTerm::prox(alpha, anchor.clone())
        }
        AlgorithmVariant::FedCl { .. } | AlgorithmVariant::FedClTe { .. } => {
            let fisher = match cfg.fisher {
                FisherEstimate::Unit => ParamVector::from(vec![1.0f32; anchor.len()]),
                FisherEstimate::Empirical { max_samples } => {
                    let proxy = proxy.ok_or_else(|| Error::config("FedCL needs a proxy set"))?;
                    let net = Network::with_params(spec.clone(), anchor.clone())?;
                    fisher_diag(
                        &net,
                        proxy,
                        max_samples,
                        seed::derive(cfg.seed, Stream::Fisher, &[round as u64]),
                    )?
                }
            };
            PenaltyTerm::fisher_diag(alpha, anchor.clone(), fisher)
        }
    }
}

/// Runs the experiment with the standard CNN for the dataset's image shape.
pub fn run_experiment(cfg: &FedConfig, train: &Dataset, test: &Dataset) -> Result<Vec<RoundRecord>> {
    let spec = ModelSpec::default_cnn(train.shape(), train.classes())?;
    let mut records = Vec::with_capacity(cfg.rounds);
    run_experiment_with(cfg, &spec, train, test, |r| {
        records.push(r.clone());
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(records)
}

/// Runs the experiment, passing each round's record to `observe` as soon as
/// it is complete. `observe` may end the run early by returning
/// `ControlFlow::Break`; an error from it aborts the run.
pub fn run_experiment_with(
    cfg: &FedConfig,
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    mut observe: impl FnMut(&RoundRecord) -> Result<ControlFlow<()>>,
) -> Result<()> {
    cfg.validate()?;
    if train.shape() != spec.input() || test.shape() != spec.input() {
        return Err(Error::config("dataset image shape does not match the model input"));
    }
    let data = prepare_data(cfg, train)?;
    let mut global = initial_model(spec, cfg.seed);
    let mut tracker = match cfg.variant.beta() {
        Some(beta) => Some(TargetTracker::new(beta, global.len())?),
        None => None,
    };

    for round in 1..=cfg.rounds {
        let lr = lr_at_round(round, cfg.lr, cfg.lr_decay);
        let selected = select_clients(cfg.clients, cfg.ratio, round, cfg.seed);

        let anchor = tracker.as_ref().and_then(|t| t.current()).unwrap_or(&global);
        let penalty = build_penalty(cfg, spec, anchor, data.proxy.as_ref(), round)?;

        let train_one = |client: usize| {
            local_train(
                spec,
                &global,
                &data.train,
                &data.shards[client],
                &penalty,
                LocalTraining {
                    epochs: cfg.epochs,
                    batch_size: cfg.batch_size,
                    lr,
                    seed: local_seed(cfg.seed, round, client),
                },
                TrainingContext { round, client },
            )
        };
        let outcomes: Vec<LocalOutcome> = if cfg.parallel_clients && selected.len() > 1 {
            std::thread::scope(|s| {
                let handles: Vec<_> = selected.iter().map(|&c| s.spawn(move || train_one(c))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("client training thread panicked"))
                    .collect::<Result<Vec<_>>>()
            })?
        } else {
            selected.iter().map(|&c| train_one(c)).collect::<Result<Vec<_>>>()?
        };

        let (models, counts): (Vec<_>, Vec<_>) = outcomes.into_iter().map(|o| (o.params, o.samples)).unzip();
        global = aggregate(&models, &counts)?;
        if let Some(t) = tracker.as_mut() {
            t.update(&global)?;
        }

        let (test_accuracy, test_loss) = evaluate(spec, &global, test, cfg.eval_batch_size)?;
        let keep = cfg.trajectory_stride > 0 && round % cfg.trajectory_stride == 0;
        let flow = observe(&RoundRecord {
            round,
            selected_clients: selected,
            test_accuracy,
            test_loss,
            lr,
            global_model: keep.then(|| global.clone()),
        })?;
        if flow.is_break() {
            break;
        }
    }
    Ok(())
}

/// Plain mini-batch SGD over the whole (post proxy split) training set, one
/// epoch per "round" with the same learning-rate schedule and shuffling
/// seeds a single client would use. Returns the model after every epoch.
pub fn train_centralized(cfg: &FedConfig, spec: &ModelSpec, train: &Dataset) -> Result<Vec<ParamVector>> {
    cfg.validate()?;
    let data = prepare_data(cfg, train)?;
    let everything = ClientShard::whole(&data.train);
    let mut net = Network::with_params(spec.clone(), initial_model(spec, cfg.seed))?;
    let mut out = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        let lr = lr_at_round(round, cfg.lr, cfg.lr_decay) as f32;
        let seed = epoch_seed(local_seed(cfg.seed, round, 0), 0);
        for batch in iterate_batches(&data.train, &everything, cfg.batch_size, seed)? {
            let (_, grad) = net.data_loss_and_grad(&batch)?;
            sgd_step_in_place(net.params_mut(), &grad, lr)?;
        }
        out.push(net.params().clone());
    }
    Ok(out)
}
