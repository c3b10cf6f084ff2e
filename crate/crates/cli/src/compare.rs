use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use fedte_core::analysis::{median, median_rounds, round_reduction};
use fedte_core::federated::VariantKind;
use serde::Serialize;

use crate::run::{read_summary, RunSummary, SUMMARY_FILE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantRow {
    pub variant: VariantKind,
    pub seeds: Vec<u64>,
    /// Median rounds to each threshold, in threshold order.
    pub rounds: Vec<Option<usize>>,
    pub converged_accuracy: f64,
    pub final_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reduction {
    pub base: VariantKind,
    pub te: VariantKind,
    /// Relative round saving per threshold; absent when either median run
    /// never reached it.
    pub rounds: Vec<Option<f64>>,
    pub converged_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub thresholds: Vec<f64>,
    pub window: usize,
    pub rows: Vec<VariantRow>,
    pub reductions: Vec<Reduction>,
}

/// Accepts `summary.json` files and directories; a directory contributes
/// its own summary and those of its immediate subdirectories.
pub fn collect_summaries(paths: &[PathBuf]) -> Result<Vec<(PathBuf, RunSummary)>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let own = p.join(SUMMARY_FILE);
            if own.is_file() {
                files.push(own);
            }
            let mut subs: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path().join(SUMMARY_FILE)))
                .filter(|f| f.is_file())
                .collect();
            subs.sort();
            files.extend(subs);
        } else {
            files.push(p.clone());
        }
    }
    files
        .into_iter()
        .map(|f| read_summary(&f).map(|s| (f, s)))
        .collect()
}

fn family_diff(a: &RunSummary, b: &RunSummary) -> Vec<String> {
    let (va, vb) = (
        serde_json::to_value(&a.family).expect("family serializes"),
        serde_json::to_value(&b.family).expect("family serializes"),
    );
    let (Some(ma), Some(mb)) = (va.as_object(), vb.as_object()) else {
        return Vec::new();
    };
    ma.iter()
        .filter(|(k, v)| mb.get(*k) != Some(v))
        .map(|(k, v)| format!("{k}: {v} vs {}", mb.get(k).cloned().unwrap_or_default()))
        .collect()
}

/// Median-over-seeds table per variant plus the saving of each "-TE"
/// variant over its base. `window` defaults to each run's own window.
pub fn compare(runs: &[(PathBuf, RunSummary)], thresholds: &[f64], window: Option<usize>) -> Result<Report> {
    if runs.len() < 2 {
        bail!("need at least two summaries to compare, got {}", runs.len());
    }
    let (first_path, first) = &runs[0];
    for (path, r) in &runs[1..] {
        let diff = family_diff(first, r);
        if !diff.is_empty() {
            bail!(
                "{} and {} were run with different settings:\n  {}",
                first_path.display(),
                path.display(),
                diff.join("\n  ")
            );
        }
    }
    let window = window.unwrap_or(first.summary.window);
    if window == 0 {
        bail!("window must be >= 1");
    }

    let mut by_variant: BTreeMap<VariantKind, Vec<&RunSummary>> = BTreeMap::new();
    for (_, r) in runs {
        by_variant.entry(r.variant).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (variant, group) in &by_variant {
        let curves: Vec<&[f64]> = group.iter().map(|r| r.summary.accuracy_curve.as_slice()).collect();
        let rounds = thresholds
            .iter()
            .map(|&t| {
                let per_seed: Vec<Option<usize>> = curves
                    .iter()
                    .map(|c| c.iter().position(|&a| a >= t).map(|i| i + 1))
                    .collect();
                median_rounds(&per_seed)
            })
            .collect();
        let converged: Vec<f64> = curves
            .iter()
            .map(|c| {
                let w = window.min(c.len());
                c[c.len() - w..].iter().sum::<f64>() / w as f64
            })
            .collect();
        let finals: Vec<f64> = curves.iter().filter_map(|c| c.last().copied()).collect();
        rows.push(VariantRow {
            variant: *variant,
            seeds: group.iter().map(|r| r.seed).collect(),
            rounds,
            converged_accuracy: median(&converged).unwrap_or(f64::NAN),
            final_accuracy: median(&finals).unwrap_or(f64::NAN),
        });
    }

    let reductions = rows
        .iter()
        .filter_map(|te| {
            let base = rows.iter().find(|b| Some(b.variant) == te.variant.base())?;
            Some(Reduction {
                base: base.variant,
                te: te.variant,
                rounds: base
                    .rounds
                    .iter()
                    .zip(&te.rounds)
                    .map(|(&b, &t)| round_reduction(b, t))
                    .collect(),
                converged_gain: te.converged_accuracy - base.converged_accuracy,
            })
        })
        .collect();
    Ok(Report {
        thresholds: thresholds.to_vec(),
        window,
        rows,
        reductions,
    })
}

impl Report {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<12} {:>6}", "variant", "seeds");
        for t in &self.thresholds {
            let _ = write!(out, " {:>9}", format!("r@{t}"));
        }
        let _ = writeln!(out, " {:>10} {:>8}", format!("conv(w={})", self.window), "final");
        for r in &self.rows {
            let _ = write!(out, "{:<12} {:>6}", r.variant.name(), r.seeds.len());
            for v in &r.rounds {
                let _ = write!(out, " {:>9}", v.map_or("-".to_string(), |n| n.to_string()));
            }
            let _ = writeln!(out, " {:>10.4} {:>8.4}", r.converged_accuracy, r.final_accuracy);
        }
        for red in &self.reductions {
            let _ = write!(out, "\n{} vs {}:", red.te.name(), red.base.name());
            for (t, v) in self.thresholds.iter().zip(&red.rounds) {
                let shown = v.map_or("absent".to_string(), |x| format!("{:.1}%", 100.0 * x));
                let _ = write!(out, " rounds to {t}: {shown};");
            }
            let _ = writeln!(out, " converged accuracy {:+.2} points", 100.0 * red.converged_gain);
        }
        out
    }
}

pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join(SUMMARY_FILE)
}
