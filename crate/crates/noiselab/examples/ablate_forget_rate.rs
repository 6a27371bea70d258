//! Forget-rate ablation: fixed rates {0, 0.1, 0.2, 0.3, 0.4} vs estimated.
//!
//! Runs the pipeline six times on the same corrupted dataset, differing only
//! in how much it removes, and prints the accuracy grid. The estimated
//! configuration adapts to the actual contamination instead of guessing.

use noiselab::data::{generate_synthetic, split_dataset, SplitFractions, SyntheticSpec};
use noiselab::estimator::{build_training_rows, fit_estimator, DEFAULT_RIDGE};
use noiselab::noise::{inject_noise, NoiseKind, NoiseSpec};
use noiselab::pipeline::{ablate_forget_rates, write_ablation_csv, RunConfig};

fn main() -> noiselab::Result<()> {
    let aux: Vec<_> = [
        (400usize, 2usize, 2usize, 0.06f64, 101u64),
        (300, 2, 3, 0.10, 103),
        (480, 2, 4, 0.09, 105),
        (250, 2, 4, 0.10, 109),
    ]
    .iter()
    .map(|&(n, c, feature_dim, cluster_spread, seed)| {
        generate_synthetic(&SyntheticSpec { n, c, feature_dim, cluster_spread, seed })
    })
    .collect::<noiselab::Result<_>>()?;

    let cfg = RunConfig {
        phase1_epochs: 12,
        phase2_epochs: 2,
        phase3_epochs: 186,
        batch_size: 32,
        phase2_batch_size: 32,
        lr: 0.01,
        forget_margin: 0.0,
        seed: 11,
        ..Default::default()
    };
    println!("fitting the estimator...");
    let rows =
        build_training_rows(&aux, &[0.0, 0.1, 0.2, 0.3, 0.4], &[NoiseKind::Symmetric], &cfg)?;
    let (estimator, _) = fit_estimator(&rows, DEFAULT_RIDGE)?;

    let base = generate_synthetic(&SyntheticSpec {
        n: 280,
        c: 2,
        feature_dim: 4,
        cluster_spread: 0.11,
        seed: 8803,
    })?;
    let (train_clean, val, test) =
        split_dataset(&base, &SplitFractions { train: 0.7, validation: 0.1, test: 0.2 }, 3)?;
    let (train, record) = inject_noise(
        &train_clean,
        &NoiseSpec { kind: NoiseKind::Symmetric, rate: 0.3, seed: 6000 },
    )?;
    println!("task: 30% symmetric noise on {} train samples\n", train.n());

    println!("sweeping six forget-rate configurations...");
    let grid = ablate_forget_rates(&train, &val, &test, &cfg, &estimator, Some(&record))?;

    println!("\n{:<12} {:>12} {:>10} {:>10}", "config", "forget_rate", "accuracy", "macro_f1");
    for row in &grid {
        println!(
            "{:<12} {:>12.3} {:>10.3} {:>10.3}",
            row.config, row.forget_rate, row.accuracy, row.macro_f1
        );
    }

    let dir = std::env::temp_dir().join("noiselab-demo");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let csv = dir.join("forget-rate-grid.csv");
    write_ablation_csv(&csv, &grid)?;
    println!("\nwrote {}", csv.display());
    Ok(())
}
