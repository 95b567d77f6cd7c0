//! Full-pipeline integration checks on the synthetic affinity task: mode
//! orderings, report shape, and determinism through the staged path.

use amas::pipeline::{
    render_report, run_full, BackendChoice, DesignerConfig, EvalReport, GraphConfig, RunConfig,
    TaskConfig,
};
use amas::optim::OptimConfig;
use amas::tasks::MetricKind;
use std::path::Path;

fn synthetic_config(output_dir: &Path) -> RunConfig {
    RunConfig {
        task: TaskConfig {
            name: "affinity".into(),
            intro: "route each query through the structure that suits it".into(),
            metric: MetricKind::Synthetic,
            dataset: None,
            synthetic_samples: 400,
            split_seed: 21,
        },
        backend: BackendChoice::Mock,
        optim: OptimConfig {
            epochs: 1,
            batch_size: 8,
            checkpoint_every: 5,
            ..OptimConfig::default()
        },
        designer: DesignerConfig {
            eval_every: 10,
            patience: 4,
            max_epochs: 6,
            batch_groups: Some(8),
            ..DesignerConfig::default()
        },
        graph: GraphConfig {
            preset: "tiny".into(),
            theta_init: 0.0,
        },
        k: 4,
        seeds: vec![1, 2, 3],
        output_dir: output_dir.to_path_buf(),
        max_calls: 10_000,
    }
}

fn mode_report<'a>(report: &'a EvalReport, mode: &str) -> &'a amas::pipeline::ModeReport {
    report
        .modes
        .iter()
        .find(|m| m.mode == mode)
        .unwrap_or_else(|| panic!("mode {mode} missing from report"))
}

#[test]
fn synthetic_run_full_mode_orderings_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let report = run_full(&synthetic_config(&out_a)).unwrap();

    // Oracle is a pointwise maximum: it dominates every fixed mode and the
    // designer mode, per seed and in the median.
    let oracle = mode_report(&report, "oracle");
    let amas = mode_report(&report, "amas");
    let random = mode_report(&report, "random");
    for mode in &report.modes {
        if mode.mode == "oracle" {
            continue;
        }
        for (seed_idx, mean) in mode.per_seed_mean.iter().enumerate() {
            assert!(
                oracle.per_seed_mean[seed_idx] >= *mean - 1e-12,
                "oracle below {} on seed index {seed_idx}",
                mode.mode
            );
        }
        assert!(oracle.median >= mode.median - 1e-12);
    }

    // The trained designer stays within the random-to-oracle band.
    assert!(
        amas.median >= random.median - 0.02,
        "designer median {} below random {}",
        amas.median,
        random.median
    );
    assert!(amas.median <= oracle.median + 1e-12);

    // Median over seeds is the sorted middle element.
    for mode in &report.modes {
        let mut sorted = mode.per_seed_mean.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(mode.median, sorted[sorted.len() / 2]);
    }

    // Per-sample selections recorded for every seed and sample.
    assert_eq!(report.selections.len(), 3);
    for selections in &report.selections {
        assert_eq!(selections.chosen.len(), report_test_len(&report));
        assert!(selections
            .chosen
            .iter()
            .all(|entry| (1..=report.k).contains(&entry.candidate_index)));
    }

    // Rendered table mentions every mode.
    let table = render_report(&report);
    for mode in &report.modes {
        assert!(table.contains(&mode.mode));
    }

    // Same config, fresh directory: byte-identical report.
    run_full(&synthetic_config(&out_b)).unwrap();
    let json_a = std::fs::read(out_a.join("report.json")).unwrap();
    let json_b = std::fs::read(out_b.join("report.json")).unwrap();
    assert_eq!(json_a, json_b);
    let txt_a = std::fs::read(out_a.join("report.txt")).unwrap();
    let txt_b = std::fs::read(out_b.join("report.txt")).unwrap();
    assert_eq!(txt_a, txt_b);

    // Artifacts for every seed exist.
    for seed in [1u64, 2, 3] {
        let seed_dir = out_a.join(format!("seed_{seed}"));
        assert!(seed_dir.join("candidates.json").exists());
        assert!(seed_dir.join("designer").join("scorer.json").exists());
        assert!(seed_dir.join("designer").join("train.jsonl").exists());
        assert!(seed_dir.join("checkpoints").exists());
    }
}

// 400 samples split 8:1:1 -> 320/40/40.
fn report_test_len(_report: &EvalReport) -> usize {
    40
}
