use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use fedte_cli::settings::{OneOrMany, DEFAULT_THRESHOLDS};
use fedte_cli::{collect_summaries, compare, execute, DatasetName, Overrides, Settings};

#[derive(Parser)]
#[command(name = "fedte", version, about = "Federated learning with temporal-ensemble constraint targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more (variant, seed) experiments.
    Run(Box<RunArgs>),
    /// Tabulate finished runs and the saving of each -TE variant.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML settings file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<DatasetName>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// fedavg, fedprox, fedcl, fedprox-te or fedcl-te; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    variant: Vec<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    /// Repeat or comma-separate for a sweep.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seed: Vec<u64>,
    #[arg(long)]
    proxy_fraction: Option<f64>,
    /// Proxy examples for the Fisher estimate (0: all-ones Fisher).
    #[arg(long)]
    fisher_samples: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    save_trajectory: bool,
    #[arg(long)]
    traj_stride: Option<usize>,
    /// Use only the first N training examples.
    #[arg(long)]
    train_limit: Option<usize>,
    /// Use only the first N test examples.
    #[arg(long)]
    test_limit: Option<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    threshold: Vec<f64>,
    #[arg(long)]
    window: Option<usize>,
    /// Run the (variant, seed) pairs concurrently.
    #[arg(long)]
    parallel: bool,
    /// Train the clients of each round concurrently.
    #[arg(long)]
    parallel_clients: bool,
    /// Stop each run once its test accuracy reaches this value.
    #[arg(long)]
    stop_at: Option<f64>,
    #[arg(long, short)]
    quiet: bool,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        let many = |v: &Vec<String>| (!v.is_empty()).then(|| OneOrMany::Many(v.clone()));
        Overrides {
            dataset: self.dataset,
            data_dir: self.data_dir.clone(),
            variant: many(&self.variant),
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            clients: self.clients,
            ratio: self.ratio,
            epochs: self.epochs,
            batch: self.batch,
            rounds: self.rounds,
            lr: self.lr,
            lr_decay: self.lr_decay,
            seed: (!self.seed.is_empty()).then(|| OneOrMany::Many(self.seed.clone())),
            proxy_fraction: self.proxy_fraction,
            fisher_samples: self.fisher_samples,
            out_dir: self.out_dir.clone(),
            save_trajectory: self.save_trajectory.then_some(true),
            traj_stride: self.traj_stride,
            train_limit: self.train_limit,
            test_limit: self.test_limit,
            thresholds: (!self.threshold.is_empty()).then(|| self.threshold.clone()),
            window: self.window,
            parallel: self.parallel.then_some(true),
            parallel_clients: self.parallel_clients.then_some(true),
            stop_at: self.stop_at,
        }
    }
}

#[derive(Args)]
struct CompareArgs {
    /// summary.json files or run directories.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    threshold: Vec<f64>,
    #[arg(long)]
    window: Option<usize>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let base = match &args.config {
                Some(path) => Overrides::from_file(path)?,
                None => Overrides::default(),
            };
            let settings = Settings::try_from(base.overlay(args.overrides()))?;
            for outcome in execute(&settings, !args.quiet)? {
                let s = &outcome.summary.summary;
                println!(
                    "{}: final accuracy {:.4}, converged accuracy {:.4} ({})",
                    s.variant,
                    s.final_accuracy,
                    s.converged_accuracy,
                    outcome.dir.display()
                );
            }
        }
        Command::Compare(args) => {
            let thresholds = if args.threshold.is_empty() {
                DEFAULT_THRESHOLDS.to_vec()
            } else {
                args.threshold
            };
            let runs = collect_summaries(&args.paths)?;
            let report = compare(&runs, &thresholds, args.window)?;
            print!("{}", report.render());
            if let Some(path) = args.json {
                fedte_cli::run::write_json(&path, &report)?;
            }
        }
    }
    Ok(())
}
