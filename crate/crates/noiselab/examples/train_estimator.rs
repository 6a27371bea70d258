//! Fit the loss-histogram noise-rate estimator and apply it to unseen data.
//!
//! Auxiliary datasets are corrupted at known rates; vanilla training on each
//! corrupted copy yields a per-sample CE loss distribution whose 1000-bin
//! histogram, together with the sample and class counts, becomes one
//! regression row. A dataset the estimator never saw then gets its noise
//! rate predicted from its own loss histogram alone. Takes about a minute.

use noiselab::data::{generate_synthetic, SyntheticSpec};
use noiselab::estimator::{
    build_training_rows, estimate_noise_rate, featurize_losses, fit_estimator, DEFAULT_RIDGE,
};
use noiselab::noise::{inject_noise, NoiseKind, NoiseSpec};
use noiselab::pipeline::{phase1_pretrain, RunConfig};

fn main() -> noiselab::Result<()> {
    let aux_specs = [
        (400usize, 2usize, 2usize, 0.06f64, 101u64),
        (550, 3, 2, 0.08, 102),
        (300, 2, 3, 0.10, 103),
        (650, 4, 2, 0.07, 104),
        (480, 2, 4, 0.09, 105),
        (600, 2, 4, 0.11, 106),
        (350, 2, 6, 0.08, 107),
        (220, 2, 4, 0.08, 108),
        (250, 2, 4, 0.10, 109),
        (280, 2, 5, 0.09, 110),
    ];
    let aux: Vec<_> = aux_specs
        .iter()
        .map(|&(n, c, feature_dim, cluster_spread, seed)| {
            generate_synthetic(&SyntheticSpec { n, c, feature_dim, cluster_spread, seed })
        })
        .collect::<noiselab::Result<_>>()?;

    // Vanilla-training protocol for every auxiliary cell and for the
    // held-out featurization below.
    let cfg = RunConfig {
        phase1_epochs: 24,
        batch_size: 32,
        lr: 0.01,
        seed: 7,
        ..Default::default()
    };

    let rates = [0.0, 0.025, 0.05, 0.075, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4];
    println!("building {} x {} training rows...", aux.len(), rates.len());
    let rows = build_training_rows(&aux, &rates, &[NoiseKind::Symmetric], &cfg)?;
    let (model, residuals) = fit_estimator(&rows, DEFAULT_RIDGE)?;
    let rmse = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    println!("fitted {} rows, training residual RMSE {rmse:.6}", rows.len());

    // Held-out dataset the regressor has never seen; each estimate is the
    // mean of three corruption/training repeats.
    let held = generate_synthetic(&SyntheticSpec {
        n: 320,
        c: 2,
        feature_dim: 3,
        cluster_spread: 0.08,
        seed: 998,
    })?;
    println!("\npredictions on held-out '{}' (mean of 3 runs):", held.name);
    println!("{:>10} {:>10} {:>10}", "true", "estimated", "error");
    for rate in [0.0, 0.1, 0.2, 0.3, 0.4] {
        let mut sum = 0.0;
        for rep in 0..3u64 {
            let spec = NoiseSpec {
                kind: NoiseKind::Symmetric,
                rate,
                seed: 4242 + (rate * 100.0) as u64 + 1000 * rep,
            };
            let (noisy, _) = inject_noise(&held, &spec)?;
            let run_cfg = RunConfig { seed: 31337 + rep, ..cfg.clone() };
            let (_, losses) = phase1_pretrain(&noisy, &run_cfg)?;
            let feats = featurize_losses(&losses, noisy.c)?;
            sum += estimate_noise_rate(&model, &feats)?.clamped;
        }
        let estimate = sum / 3.0;
        println!("{rate:>10.2} {estimate:>10.3} {:>+10.3}", estimate - rate);
    }
    Ok(())
}
