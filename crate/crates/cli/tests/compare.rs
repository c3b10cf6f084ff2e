use std::path::PathBuf;

use fedte_cli::run::{Family, RunSummary};
use fedte_cli::{compare, DatasetName};
use fedte_core::analysis::ExperimentSummary;
use fedte_core::federated::VariantKind;

fn family() -> Family {
    Family {
        dataset: DatasetName::Mnist,
        gamma: 1.0,
        clients: 10,
        ratio: 0.2,
        epochs: 2,
        batch: 50,
        rounds: 120,
        lr: 0.005,
        lr_decay: 0.99,
        proxy_fraction: 0.01,
        fisher_samples: 1024,
        train_limit: None,
        test_limit: None,
        stop_at: None,
    }
}

/// A curve that first reaches 0.95 at `hit` (or never).
fn run(variant: VariantKind, seed: u64, hit: Option<usize>) -> (PathBuf, RunSummary) {
    let curve: Vec<f64> = (1..=120)
        .map(|r| match hit {
            Some(h) if r >= h => 0.96,
            _ => 0.5 + 0.4 * r as f64 / 120.0,
        })
        .collect();
    let records: Vec<_> = curve
        .iter()
        .enumerate()
        .map(|(i, &a)| fedte_core::federated::RoundRecord {
            round: i + 1,
            selected_clients: vec![0, 1],
            test_accuracy: a,
            test_loss: 0.1,
            lr: 0.005,
            global_model: None,
        })
        .collect();
    (
        PathBuf::from(format!("{}-{seed}", variant.name())),
        RunSummary {
            variant,
            alpha: 1.0,
            beta: 0.2,
            seed,
            family: family(),
            summary: ExperimentSummary::from_records(variant.name(), seed, &records, &[0.95], 20).unwrap(),
            explained_variance_ratio: None,
            seconds: 0.0,
        },
    )
}

#[test]
fn twenty_percent_fewer_rounds() {
    let runs = [
        run(VariantKind::FedProx, 1, Some(100)),
        run(VariantKind::FedProxTe, 1, Some(80)),
    ];
    let report = compare(&runs, &[0.95], None).unwrap();
    assert_eq!(report.reductions.len(), 1);
    let r = report.reductions[0].rounds[0].unwrap();
    assert!((r - 0.2).abs() < 1e-12);
}

#[test]
fn identical_runs_save_nothing() {
    let runs = [
        run(VariantKind::FedProx, 1, Some(60)),
        run(VariantKind::FedProxTe, 1, Some(60)),
    ];
    let report = compare(&runs, &[0.95], None).unwrap();
    assert_eq!(report.reductions[0].rounds[0], Some(0.0));
    assert_eq!(report.reductions[0].converged_gain, 0.0);
}

#[test]
fn unreached_threshold_is_absent_not_negative() {
    let runs = [
        run(VariantKind::FedCl, 1, Some(60)),
        run(VariantKind::FedClTe, 1, None),
    ];
    let report = compare(&runs, &[0.95], None).unwrap();
    assert_eq!(report.reductions[0].rounds[0], None);
    assert!(report.render().contains("absent"));
}

#[test]
fn medians_over_seeds() {
    let runs = [
        run(VariantKind::FedProx, 1, Some(100)),
        run(VariantKind::FedProx, 2, Some(90)),
        run(VariantKind::FedProx, 3, None),
        run(VariantKind::FedProxTe, 1, Some(70)),
        run(VariantKind::FedProxTe, 2, Some(50)),
        run(VariantKind::FedProxTe, 3, Some(95)),
    ];
    let report = compare(&runs, &[0.95], None).unwrap();
    assert_eq!(report.rows[0].rounds[0], Some(100));
    assert_eq!(report.rows[1].rounds[0], Some(70));
    assert!((report.reductions[0].rounds[0].unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn mismatched_settings_are_refused() {
    let mut other = run(VariantKind::FedProxTe, 1, Some(80));
    other.1.family.gamma = 10.0;
    let err = compare(&[run(VariantKind::FedProx, 1, Some(100)), other], &[0.95], None).unwrap_err();
    assert!(err.to_string().contains("gamma: 1.0 vs 10.0"), "{err}");
}

#[test]
fn a_single_summary_is_not_a_comparison() {
    assert!(compare(&[run(VariantKind::FedProx, 1, Some(100))], &[0.95], None).is_err());
}
