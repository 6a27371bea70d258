//! Noise-rate estimation from the shape of the per-sample loss distribution.
//!
//! After vanilla training on a corrupted dataset, per-sample CE losses are
//! bucketed into 1000 equal-width intervals over [0, max(loss)], highest
//! interval first. The interval mass ratios, together with the sample count
//! and class count, feed an affine regressor fitted on auxiliary datasets
//! whose injected noise rates are known; applying it to a fresh loss
//! distribution predicts that dataset's unknown noise rate.
//!
//! The fit standardizes features (an affine reparameterization, so the model
//! class is unchanged) and solves ridge-regularized least squares exactly
//! through the kernel form of the normal equations: with Z the standardized
//! rows, `w = Z^T (Z Z^T + ridge*I)^-1 y_centered`, which equals the primal
//! ridge solution for ridge > 0 and the minimum-norm least-squares solution
//! at ridge = 0. The Gram matrix is only rows x rows, which suits the
//! few-rows / 1002-features regime; a tiny default ridge keeps the solution
//! deterministic when the system is underdetermined.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::init_params;
use crate::noise::{inject_noise, NoiseKind, NoiseSpec};
use crate::objective::ObjectiveConfig;
use crate::pipeline::RunConfig;
use crate::rng::{derive_seed, stream};
use crate::trainer;

/// Number of loss-histogram intervals (the feature vector's `j`).
pub const HISTOGRAM_BINS: usize = 1000;

/// Default ridge strength: enough to pick the minimum-norm solution of an
/// underdetermined system deterministically, small enough not to bias it.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Histogram features of one loss distribution: `ratios[0]` is the mass of
/// the highest-loss interval (descending orientation), and the ratios sum
/// to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistogramFeatures {
    pub ratios: Vec<f64>,
    pub n_samples: usize,
    pub n_classes: usize,
}

impl LossHistogramFeatures {
    /// The regression input: ratios, then sample count, then class count.
    pub fn regression_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.ratios.len() + 2);
        v.extend_from_slice(&self.ratios);
        v.push(self.n_samples as f64);
        v.push(self.n_classes as f64);
        v
    }
}

/// Bucket per-sample losses into [`HISTOGRAM_BINS`] equal-width intervals
/// over [0, max(loss)], highest interval first. Losses exactly at the upper
/// edge land in the highest interval; if every loss is identical (including
/// all zero) the entire mass sits there.
pub fn featurize_losses(losses: &[f64], c: usize) -> Result<LossHistogramFeatures> {
    if losses.is_empty() {
        return Err(Error::Argument("cannot featurize an empty loss vector".into()));
    }
    if c < 2 {
        return Err(Error::Argument(format!("class count must be >= 2, got {c}")));
    }
    for (i, &v) in losses.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Data(format!("loss {v} at index {i} is negative or non-finite")));
        }
    }

    let n = losses.len();
    let hi = losses.iter().cloned().fold(0.0, f64::max);
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for &v in losses {
        let from_bottom = if hi == 0.0 {
            HISTOGRAM_BINS - 1
        } else {
            (((v / hi) * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1)
        };
        counts[HISTOGRAM_BINS - 1 - from_bottom] += 1;
    }
    let ratios = counts.into_iter().map(|k| k as f64 / n as f64).collect();
    Ok(LossHistogramFeatures { ratios, n_samples: n, n_classes: c })
}

/// One supervised example for the regressor: features from a corrupted
/// auxiliary run paired with the rate that was injected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorTrainingRow {
    pub features: LossHistogramFeatures,
    pub target: f64,
}

/// Fitted noise-rate regressor. Weights act on standardized features:
/// `eta = bias + sum_i weights[i] * (x[i] - feature_means[i]) / feature_scales[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    pub j: usize,
}

impl EstimatorModel {
    pub fn validate(&self) -> Result<()> {
        if self.j != HISTOGRAM_BINS {
            return Err(Error::Data(format!(
                "estimator expects j={HISTOGRAM_BINS}, file declares {}",
                self.j
            )));
        }
        let p = self.j + 2;
        if self.weights.len() != p
            || self.feature_means.len() != p
            || self.feature_scales.len() != p
        {
            return Err(Error::Data(format!(
                "estimator vectors must have length {p}; got weights={}, means={}, scales={}",
                self.weights.len(),
                self.feature_means.len(),
                self.feature_scales.len()
            )));
        }
        let finite = self
            .weights
            .iter()
            .chain(&self.feature_means)
            .chain(&self.feature_scales)
            .all(|v| v.is_finite())
            && self.bias.is_finite();
        if !finite {
            return Err(Error::Data("estimator holds non-finite entries".into()));
        }
        if self.feature_scales.iter().any(|&s| s <= 0.0) {
            return Err(Error::Data("feature scales must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("estimator serialization cannot fail");
        std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        let model: EstimatorModel = serde_json::from_str(&text)
            .map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
        model.validate()?;
        Ok(model)
    }
}

/// Raw affine prediction plus its clamp to the feasible range
/// `[0, (c-1)/c - 1e-6]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRateEstimate {
    pub raw: f64,
    pub clamped: f64,
}

/// Apply the regressor to one loss-histogram feature vector.
pub fn estimate_noise_rate(
    model: &EstimatorModel,
    feats: &LossHistogramFeatures,
) -> Result<NoiseRateEstimate> {
    model.validate()?;
    let x = feats.regression_vector();
    if x.len() != model.weights.len() {
        return Err(Error::Argument(format!(
            "feature vector has {} entries, model expects {}",
            x.len(),
            model.weights.len()
        )));
    }
    let mut raw = model.bias;
    for i in 0..x.len() {
        raw += model.weights[i] * (x[i] - model.feature_means[i]) / model.feature_scales[i];
    }
    let c = feats.n_classes as f64;
    let upper = (c - 1.0) / c - 1e-6;
    Ok(NoiseRateEstimate { raw, clamped: raw.clamp(0.0, upper) })
}

/// Fit the regressor on labeled rows. Returns the model and its training
/// residuals (prediction minus target, row order preserved).
pub fn fit_estimator(
    rows: &[EstimatorTrainingRow],
    ridge: f64,
) -> Result<(EstimatorModel, Vec<f64>)> {
    if rows.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 training rows, got {}",
            rows.len()
        )));
    }
    if !(ridge >= 0.0) {
        return Err(Error::Argument(format!("ridge must be >= 0, got {ridge}")));
    }
    let p = HISTOGRAM_BINS + 2;
    let n = rows.len();
    let raw: Vec<Vec<f64>> = rows.iter().map(|r| r.features.regression_vector()).collect();
    if raw.iter().any(|r| r.len() != p) {
        return Err(Error::Argument("all rows must carry full histogram features".into()));
    }

    // Standardize: zero mean, unit population variance; constant features
    // keep scale 1 so they contribute nothing after centering.
    let mut means = vec![0.0; p];
    for row in &raw {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut scales = vec![0.0; p];
    for row in &raw {
        for (s, (&v, &m)) in scales.iter_mut().zip(row.iter().zip(&means)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut scales {
        let var = *s / n as f64;
        *s = if var > 0.0 { var.sqrt() } else { 1.0 };
    }

    let z: Vec<Vec<f64>> = raw
        .iter()
        .map(|row| {
            row.iter().zip(means.iter().zip(&scales)).map(|(&v, (&m, &s))| (v - m) / s).collect()
        })
        .collect();

    let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let bias = targets.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = targets.iter().map(|&t| t - bias).collect();

    // Kernel form: alpha = (Z Z^T + ridge I)^+ y_centered, w = Z^T alpha.
    let mut gram = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let dot: f64 = z[a].iter().zip(&z[b]).map(|(x, y)| x * y).sum();
            gram[a][b] = dot;
            gram[b][a] = dot;
        }
        gram[a][a] += ridge;
    }
    let (eigenvalues, vectors) = sym_eigen(gram);
    let lambda_max = eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = lambda_max * 1e-12;
    let mut alpha = vec![0.0; n];
    for k in 0..n {
        let lambda = eigenvalues[k];
        if lambda > cutoff && lambda > 0.0 {
            let proj: f64 = (0..n).map(|i| vectors[i][k] * centered[i]).sum();
            let coef = proj / lambda;
            for (a, row) in alpha.iter_mut().zip(&vectors) {
                *a += coef * row[k];
            }
        }
    }

    let mut weights = vec![0.0; p];
    for (a, zrow) in alpha.iter().zip(&z) {
        for (w, &v) in weights.iter_mut().zip(zrow) {
            *w += a * v;
        }
    }

    let model = EstimatorModel {
        weights,
        bias,
        feature_means: means,
        feature_scales: scales,
        j: HISTOGRAM_BINS,
    };
    model.validate()?;
    let residuals = rows
        .iter()
        .map(|r| estimate_noise_rate(&model, &r.features).map(|e| e.raw - r.target))
        .collect::<Result<Vec<f64>>>()?;
    Ok((model, residuals))
}

/// Run the auxiliary protocol: for every (dataset, rate, kind) cell, inject
/// noise, run vanilla CE training at phase-1 settings, take one
/// frozen-weights loss pass, and featurize. Rows come back in
/// dataset-major, then rate, then kind order.
///
/// The network shape follows `cfg`'s hidden layers with input/output widths
/// adapted to each auxiliary dataset.
pub fn build_training_rows(
    auxiliary: &[Dataset],
    rates: &[f64],
    noise_kinds: &[NoiseKind],
    cfg: &RunConfig,
) -> Result<Vec<EstimatorTrainingRow>> {
    if auxiliary.is_empty() || rates.is_empty() || noise_kinds.is_empty() {
        return Err(Error::Argument(
            "need at least one auxiliary dataset, one rate, and one noise kind".into(),
        ));
    }
    for d in auxiliary {
        if d.split != Split::Train {
            return Err(Error::Usage(format!(
                "auxiliary dataset '{}' must be a train split, got {}",
                d.name, d.split
            )));
        }
        let bound = (d.c as f64 - 1.0) / d.c as f64;
        for &rate in rates {
            if !(0.0..bound).contains(&rate) {
                return Err(Error::Argument(format!(
                    "rate {rate} out of [0, {bound:.4}) for dataset '{}' with c={}",
                    d.name, d.c
                )));
            }
        }
    }

    let mut rows = Vec::with_capacity(auxiliary.len() * rates.len() * noise_kinds.len());
    for (di, d) in auxiliary.iter().enumerate() {
        for (ri, &rate) in rates.iter().enumerate() {
            for (ki, &kind) in noise_kinds.iter().enumerate() {
                let cell_seed = derive_seed(
                    cfg.seed,
                    &[stream::ESTIMATOR_CELL, di as u64, ri as u64, ki as u64],
                );
                let spec = NoiseSpec {
                    kind,
                    rate,
                    seed: derive_seed(cell_seed, &[stream::CELL_NOISE]),
                };
                let (noisy, _) = inject_noise(d, &spec)?;

                let mlp_spec = cfg.adapted_model_spec(
                    d.feature_dim,
                    d.c,
                    derive_seed(cell_seed, &[stream::CELL_INIT]),
                );
                let mut params = init_params(&mlp_spec)?;
                trainer::train_epochs(
                    &mut params,
                    &noisy,
                    &ObjectiveConfig::vanilla_ce(),
                    cfg.phase1_epochs,
                    cfg.batch_size,
                    cfg.lr,
                    cell_seed,
                    0,
                    "estimator-aux",
                    |_, _| {},
                )
                .map_err(|e| {
                    Error::run(
                        "estimator-aux",
                        format!("dataset '{}' at rate {rate}: {e}", d.name),
                    )
                })?;
                let losses = trainer::per_sample_ce_losses(&params, &noisy)?;
                let features = featurize_losses(&losses, d.c)?;
                rows.push(EstimatorTrainingRow { features, target: rate });
            }
        }
    }
    Ok(rows)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues and an orthogonal matrix stored row-wise, where
/// column k (`vectors[i][k]`) is the eigenvector for `eigenvalues[k]`.
fn sym_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if n == 0 {
        return (Vec::new(), v);
    }

    let frobenius: f64 =
        a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * frobenius;

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= tol / (n as f64) {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in &mut v {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}
