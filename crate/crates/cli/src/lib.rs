//! Experiment runner: loads a dataset, runs each requested (variant, seed)
//! pair and writes `metrics.csv`, `summary.json`, `manifest.json` and
//! optionally `trajectory.csv` per run; `compare` tabulates finished runs.

pub mod compare;
pub mod datasets;
pub mod run;
pub mod settings;

pub use compare::{collect_summaries, compare, Report};
pub use run::{execute, RunManifest, RunOutcome, RunSummary};
pub use settings::{DatasetName, Overrides, Settings};
