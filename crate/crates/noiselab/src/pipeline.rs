//! Three-phase noise-robust training: pre-train on everything, rank losses
//! and drop the presumed-noisy top slice, then retrain on the cleaned set
//! with the sparse-regularized objective.
//!
//! Phase 1 runs vanilla CE for `phase1_epochs`. Phase 2 continues vanilla CE
//! at the smaller `phase2_batch_size`, takes one frozen-weights loss pass,
//! estimates the noise rate from the loss histogram, and removes the
//! `floor(k*n)` highest-loss samples where `k = eta_hat - forget_margin`
//! (or an explicit override). Phase 3 re-initializes by default and trains
//! on the cleaned set with GCE + tempered softmax + Lp regularization.
//! The baseline mode is the same budget spent on plain CE with no selection.
//!
//! Every stochastic choice derives from `RunConfig::seed`, so a whole run is
//! a pure function of (datasets, config, estimator model) and repeated runs
//! serialize to byte-identical reports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{estimate_noise_rate, featurize_losses, EstimatorModel};
use crate::metrics::{compute_metrics, MetricSet};
use crate::model::{init_params, MlpSpec, ModelParams};
use crate::noise::CorruptionRecord;
use crate::objective::ObjectiveConfig;
use crate::rng::{derive_seed, stream};
use crate::trainer;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_phase1_epochs")]
    pub phase1_epochs: usize,
    #[serde(default = "default_phase2_epochs")]
    pub phase2_epochs: usize,
    #[serde(default = "default_phase3_epochs")]
    pub phase3_epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_phase2_batch_size")]
    pub phase2_batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    /// How far below the estimated noise rate the forget rate sits.
    #[serde(default = "default_forget_margin")]
    pub forget_margin: f64,
    /// Fixed forget rate bypassing the estimate (ablation studies).
    #[serde(default)]
    pub forget_rate_override: Option<f64>,
    /// Re-initialize parameters for phase 3 (default) instead of warm-starting
    /// from the phase-2 weights.
    #[serde(default = "default_reinit")]
    pub reinit_phase3: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Network shape; when absent, [feature_dim, 128, 64, c] is derived from
    /// the training set.
    #[serde(default)]
    pub model_spec: Option<MlpSpec>,
    /// Where the CLI finds the fitted estimator when no flag is given.
    #[serde(default)]
    pub estimator_path: Option<PathBuf>,
}

fn default_phase1_epochs() -> usize {
    90
}
fn default_phase2_epochs() -> usize {
    20
}
fn default_phase3_epochs() -> usize {
    90
}
fn default_batch_size() -> usize {
    128
}
fn default_phase2_batch_size() -> usize {
    16
}
fn default_lr() -> f64 {
    0.01
}
fn default_forget_margin() -> f64 {
    0.05
}
fn default_reinit() -> bool {
    true
}

/// Default run seed, overridable through the NOISELAB_SEED environment
/// variable.
pub fn default_seed() -> u64 {
    std::env::var("NOISELAB_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0)
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            phase1_epochs: default_phase1_epochs(),
            phase2_epochs: default_phase2_epochs(),
            phase3_epochs: default_phase3_epochs(),
            batch_size: default_batch_size(),
            phase2_batch_size: default_phase2_batch_size(),
            lr: default_lr(),
            objective: ObjectiveConfig::default(),
            forget_margin: default_forget_margin(),
            forget_rate_override: None,
            reinit_phase3: default_reinit(),
            seed: default_seed(),
            model_spec: None,
            estimator_path: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.phase2_batch_size == 0 {
            return Err(Error::Argument("batch sizes must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Argument(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(self.forget_margin >= 0.0) {
            return Err(Error::Argument(format!(
                "forget margin must be >= 0, got {}",
                self.forget_margin
            )));
        }
        if let Some(k) = self.forget_rate_override {
            if !(0.0..1.0).contains(&k) {
                return Err(Error::Argument(format!(
                    "forget rate override must lie in [0, 1), got {k}"
                )));
            }
        }
        self.objective.validate()?;
        if let Some(spec) = &self.model_spec {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.phase1_epochs + self.phase2_epochs + self.phase3_epochs
    }

    /// Network shape for a dataset with the given dimensions: the configured
    /// spec when present (dimensions must agree), else [d, 128, 64, c].
    pub fn resolved_model_spec(&self, feature_dim: usize, c: usize) -> Result<MlpSpec> {
        match &self.model_spec {
            Some(spec) => {
                spec.validate()?;
                if spec.input_dim() != feature_dim || spec.output_dim() != c {
                    return Err(Error::Argument(format!(
                        "model spec is {}->{} but the dataset needs {}->{}",
                        spec.input_dim(),
                        spec.output_dim(),
                        feature_dim,
                        c
                    )));
                }
                Ok(spec.clone())
            }
            None => MlpSpec::new(
                vec![feature_dim, 128, 64, c],
                derive_seed(self.seed, &[stream::PHASE1_INIT]),
            ),
        }
    }

    /// Shape for auxiliary estimator runs: the configured hidden layers with
    /// input/output widths adapted to the auxiliary dataset.
    pub fn adapted_model_spec(&self, feature_dim: usize, c: usize, init_seed: u64) -> MlpSpec {
        let hidden: Vec<usize> = match &self.model_spec {
            Some(spec) if spec.layer_sizes.len() > 2 => {
                spec.layer_sizes[1..spec.layer_sizes.len() - 1].to_vec()
            }
            Some(_) => Vec::new(),
            None => vec![128, 64],
        };
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(feature_dim);
        layer_sizes.extend(hidden);
        layer_sizes.push(c);
        MlpSpec { layer_sizes, activation: crate::model::Activation::Relu, init_seed }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serialization cannot fail");
        std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Outcome of the phase-2 filter: which samples stay, which go, and the
/// estimate that drove the decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub kept_indices: Vec<usize>,
    pub removed_indices: Vec<usize>,
    pub forget_rate: f64,
    pub eta_hat: f64,
    pub eta_hat_raw: f64,
    pub per_sample_loss: Vec<f64>,
}

/// Phase 1: vanilla CE pre-training, then one frozen-weights pass producing
/// every sample's CE loss.
pub fn phase1_pretrain(d_train: &Dataset, cfg: &RunConfig) -> Result<(ModelParams, Vec<f64>)> {
    cfg.validate()?;
    if d_train.n() == 0 {
        return Err(Error::run("phase1", "training set is empty"));
    }
    let spec = cfg.resolved_model_spec(d_train.feature_dim, d_train.c)?;
    let mut params = init_params(&spec)?;
    trainer::train_epochs(
        &mut params,
        d_train,
        &ObjectiveConfig::vanilla_ce(),
        cfg.phase1_epochs,
        cfg.batch_size,
        cfg.lr,
        cfg.seed,
        0,
        "phase1",
        |_, _| {},
    )?;
    let losses = trainer::per_sample_ce_losses(&params, d_train)?;
    Ok((params, losses))
}

/// Phase 2 decision: estimate the noise rate from the loss histogram, set
/// the forget rate, and mark the `floor(k*n)` highest-loss samples for
/// removal. Ties break toward the lower sample index being removed first.
pub fn phase2_select(
    d_train: &Dataset,
    losses: &[f64],
    cfg: &RunConfig,
    estimator: &EstimatorModel,
) -> Result<SelectionResult> {
    cfg.validate()?;
    let n = d_train.n();
    if losses.len() != n {
        return Err(Error::Argument(format!(
            "loss vector has {} entries for {} samples",
            losses.len(),
            n
        )));
    }
    let feats = featurize_losses(losses, d_train.c)?;
    let estimate = estimate_noise_rate(estimator, &feats)?;
    let forget_rate = cfg
        .forget_rate_override
        .unwrap_or_else(|| (estimate.clamped - cfg.forget_margin).max(0.0));

    let remove_count = (forget_rate * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        losses[b].partial_cmp(&losses[a]).expect("losses validated finite").then(a.cmp(&b))
    });
    let mut removed_indices: Vec<usize> = order[..remove_count].to_vec();
    let mut kept_indices: Vec<usize> = order[remove_count..].to_vec();
    removed_indices.sort_unstable();
    kept_indices.sort_unstable();

    Ok(SelectionResult {
        kept_indices,
        removed_indices,
        forget_rate,
        eta_hat: estimate.clamped,
        eta_hat_raw: estimate.raw,
        per_sample_loss: losses.to_vec(),
    })
}

/// Phase 3: train on the cleaned set with the sparse-regularized objective,
/// from a fresh initialization by default or from the supplied pre-trained
/// weights when `reinit_phase3` is off.
pub fn phase3_train(
    d_clean: &Dataset,
    cfg: &RunConfig,
    warm_params: Option<&ModelParams>,
) -> Result<ModelParams> {
    cfg.validate()?;
    if d_clean.n() == 0 {
        return Err(Error::run(
            "phase3",
            "cleaned dataset is empty: the forget rate removed every sample",
        ));
    }
    let mut params = if cfg.reinit_phase3 {
        let mut spec = cfg.resolved_model_spec(d_clean.feature_dim, d_clean.c)?;
        spec.init_seed = derive_seed(cfg.seed, &[stream::PHASE3_INIT]);
        init_params(&spec)?
    } else {
        warm_params
            .cloned()
            .ok_or_else(|| Error::Usage("warm start requested but no weights supplied".into()))?
    };
    trainer::train_epochs(
        &mut params,
        d_clean,
        &cfg.objective,
        cfg.phase3_epochs,
        cfg.batch_size,
        cfg.lr,
        cfg.seed,
        cfg.phase1_epochs + cfg.phase2_epochs,
        "phase3",
        |_, _| {},
    )?;
    Ok(params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub auc: Vec<f64>,
    pub mean_auc: f64,
}

impl From<MetricSet> for MetricsReport {
    fn from(m: MetricSet) -> Self {
        MetricsReport {
            accuracy: m.accuracy,
            macro_f1: m.macro_f1,
            auc: m.per_class_auc,
            mean_auc: m.mean_auc,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub removed_count: usize,
    pub kept_count: usize,
    /// Fraction of removed samples that were truly corrupted; absent when
    /// nothing was removed or no corruption record was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    /// Fraction of corrupted samples that were removed; absent when nothing
    /// was corrupted or no record was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub phase: String,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_hat_raw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forget_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionReport>,
    /// Test metrics of the last-epoch model.
    pub metrics: MetricsReport,
    /// Test metrics of the model at the best validation epoch.
    pub metrics_best_val: MetricsReport,
    pub best_val_epoch: usize,
    pub curves: Vec<CurvePoint>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        serde_json::from_str(&text).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })
    }
}

/// Tracks the best-validation snapshot across every epoch of a run.
struct BestTracker {
    accuracy: f64,
    epoch: usize,
    params: Option<(ModelParams, f64)>, // params and the tau they evaluate with
}

impl BestTracker {
    fn new() -> Self {
        BestTracker { accuracy: f64::NEG_INFINITY, epoch: 0, params: None }
    }

    fn observe(&mut self, epoch: usize, accuracy: f64, params: &ModelParams, tau: f64) {
        if accuracy > self.accuracy {
            self.accuracy = accuracy;
            self.epoch = epoch;
            self.params = Some((params.clone(), tau));
        }
    }
}

fn check_split_consistency(train: &Dataset, val: &Dataset, test: &Dataset) -> Result<()> {
    for (label, d) in [("validation", val), ("test", test)] {
        if d.c != train.c || d.feature_dim != train.feature_dim {
            return Err(Error::Argument(format!(
                "{label} split has c={} feature_dim={}, train has c={} feature_dim={}",
                d.c, d.feature_dim, train.c, train.feature_dim
            )));
        }
    }
    if train.n() == 0 || val.n() == 0 || test.n() == 0 {
        return Err(Error::Argument("train, validation, and test splits must be nonempty".into()));
    }
    Ok(())
}

/// One epoch-by-epoch training stage with per-epoch validation, curve
/// collection, and best-snapshot tracking. Global epoch numbering keeps the
/// shuffle stream identical to a single uninterrupted call.
#[allow(clippy::too_many_arguments)]
fn run_stage(
    params: &mut ModelParams,
    train: &Dataset,
    val: &Dataset,
    objective: &ObjectiveConfig,
    epochs: std::ops::Range<usize>,
    batch_size: usize,
    cfg: &RunConfig,
    phase: &str,
    curves: &mut Vec<CurvePoint>,
    best: &mut BestTracker,
) -> Result<()> {
    for epoch in epochs {
        let mut epoch_loss = 0.0;
        trainer::train_epochs(
            params,
            train,
            objective,
            1,
            batch_size,
            cfg.lr,
            cfg.seed,
            epoch,
            phase,
            |_, loss| epoch_loss = loss,
        )?;
        let val_accuracy = trainer::accuracy(params, val, objective.tau)?;
        curves.push(CurvePoint {
            epoch,
            phase: phase.to_string(),
            train_loss: epoch_loss,
            val_accuracy,
        });
        best.observe(epoch, val_accuracy, params, objective.tau);
    }
    Ok(())
}

fn selection_report(
    selection: &SelectionResult,
    corruption: Option<&CorruptionRecord>,
) -> SelectionReport {
    let removed_count = selection.removed_indices.len();
    let kept_count = selection.kept_indices.len();
    let (precision, recall) = match corruption {
        Some(record) => {
            let truly_flipped = record.flipped_count();
            let hits =
                selection.removed_indices.iter().filter(|&&i| record.flipped[i]).count();
            let precision =
                (removed_count > 0).then(|| hits as f64 / removed_count as f64);
            let recall = (truly_flipped > 0).then(|| hits as f64 / truly_flipped as f64);
            (precision, recall)
        }
        None => (None, None),
    };
    SelectionReport { removed_count, kept_count, precision, recall }
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    mode: &str,
    cfg_echo: RunConfig,
    final_params: &ModelParams,
    final_tau: f64,
    test: &Dataset,
    best: BestTracker,
    curves: Vec<CurvePoint>,
    selection: Option<(&SelectionResult, Option<&CorruptionRecord>)>,
) -> Result<RunReport> {
    let test_labels: Vec<usize> = test.samples.iter().map(|s| s.observed_label).collect();
    let last_probs = trainer::predict_probs(final_params, test, final_tau)?;
    let metrics: MetricsReport = compute_metrics(&last_probs, &test_labels)?.into();

    let (best_params, best_tau, best_epoch) = match best.params {
        Some((p, tau)) => (p, tau, best.epoch),
        None => (final_params.clone(), final_tau, 0),
    };
    let best_probs = trainer::predict_probs(&best_params, test, best_tau)?;
    let metrics_best_val: MetricsReport = compute_metrics(&best_probs, &test_labels)?.into();

    let (eta_hat, eta_hat_raw, forget_rate, selection_block) = match selection {
        Some((sel, corruption)) => (
            Some(sel.eta_hat),
            Some(sel.eta_hat_raw),
            Some(sel.forget_rate),
            Some(selection_report(sel, corruption)),
        ),
        None => (None, None, None, None),
    };

    Ok(RunReport {
        mode: mode.to_string(),
        config: cfg_echo,
        eta_hat,
        eta_hat_raw,
        forget_rate,
        selection: selection_block,
        metrics,
        metrics_best_val,
        best_val_epoch: best_epoch,
        curves,
    })
}

/// Execute the full three-phase pipeline and emit a run report. Supplying
/// the corruption ledger adds selection precision/recall to the report.
pub fn run_pipeline(
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    cfg: &RunConfig,
    estimator: &EstimatorModel,
    corruption: Option<&CorruptionRecord>,
) -> Result<RunReport> {
    run_pipeline_with_params(train, val, test, cfg, estimator, corruption).map(|(r, _)| r)
}

/// [`run_pipeline`] variant that also hands back the trained phase-3
/// parameters, for saving or later evaluation.
pub fn run_pipeline_with_params(
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    cfg: &RunConfig,
    estimator: &EstimatorModel,
    corruption: Option<&CorruptionRecord>,
) -> Result<(RunReport, ModelParams)> {
    cfg.validate()?;
    check_split_consistency(train, val, test)?;
    if let Some(record) = corruption {
        if record.flipped.len() != train.n() {
            return Err(Error::Argument(format!(
                "corruption record covers {} samples, train split has {}",
                record.flipped.len(),
                train.n()
            )));
        }
    }

    let spec = cfg.resolved_model_spec(train.feature_dim, train.c)?;
    let mut cfg_echo = cfg.clone();
    cfg_echo.model_spec = Some(spec.clone());

    let mut curves = Vec::with_capacity(cfg.total_epochs());
    let mut best = BestTracker::new();
    let vanilla = ObjectiveConfig::vanilla_ce();

    // Phase 1: pre-training on everything.
    let mut params = init_params(&spec)?;
    run_stage(
        &mut params,
        train,
        val,
        &vanilla,
        0..cfg.phase1_epochs,
        cfg.batch_size,
        cfg,
        "phase1",
        &mut curves,
        &mut best,
    )?;

    // Phase 2: continued vanilla training at the small batch size, then the
    // frozen-weights loss pass and the filter decision.
    let p2_start = cfg.phase1_epochs;
    let p2_end = cfg.phase1_epochs + cfg.phase2_epochs;
    run_stage(
        &mut params,
        train,
        val,
        &vanilla,
        p2_start..p2_end,
        cfg.phase2_batch_size,
        cfg,
        "phase2",
        &mut curves,
        &mut best,
    )?;
    let losses = trainer::per_sample_ce_losses(&params, train)?;
    let selection = phase2_select(train, &losses, cfg, estimator)?;
    let cleaned = train.subset(&selection.kept_indices, "-cleaned")?;
    if cleaned.n() == 0 {
        return Err(Error::run(
            "phase3",
            "cleaned dataset is empty: the forget rate removed every sample",
        ));
    }

    // Phase 3: sparse-regularized training on the cleaned set.
    let mut params3 = if cfg.reinit_phase3 {
        let mut spec3 = spec.clone();
        spec3.init_seed = derive_seed(cfg.seed, &[stream::PHASE3_INIT]);
        init_params(&spec3)?
    } else {
        params
    };
    run_stage(
        &mut params3,
        &cleaned,
        val,
        &cfg.objective,
        p2_end..cfg.total_epochs(),
        cfg.batch_size,
        cfg,
        "phase3",
        &mut curves,
        &mut best,
    )?;

    let report = finish_report(
        "pipeline",
        cfg_echo,
        &params3,
        cfg.objective.tau,
        test,
        best,
        curves,
        Some((&selection, corruption)),
    )?;
    Ok((report, params3))
}

/// Baseline mode: the whole epoch budget spent on vanilla CE training with
/// no selection and no regularization.
pub fn run_baseline(
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    cfg: &RunConfig,
) -> Result<RunReport> {
    run_baseline_with_params(train, val, test, cfg).map(|(r, _)| r)
}

/// [`run_baseline`] variant that also hands back the trained parameters.
pub fn run_baseline_with_params(
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    cfg: &RunConfig,
) -> Result<(RunReport, ModelParams)> {
    cfg.validate()?;
    check_split_consistency(train, val, test)?;

    let spec = cfg.resolved_model_spec(train.feature_dim, train.c)?;
    let mut cfg_echo = cfg.clone();
    cfg_echo.model_spec = Some(spec.clone());

    let mut curves = Vec::with_capacity(cfg.total_epochs());
    let mut best = BestTracker::new();
    let vanilla = ObjectiveConfig::vanilla_ce();

    let mut params = init_params(&spec)?;
    run_stage(
        &mut params,
        train,
        val,
        &vanilla,
        0..cfg.total_epochs(),
        cfg.batch_size,
        cfg,
        "baseline",
        &mut curves,
        &mut best,
    )?;

    let report = finish_report("baseline", cfg_echo, &params, 1.0, test, best, curves, None)?;
    Ok((report, params))
}

/// One row of the forget-rate ablation grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub config: String,
    pub forget_rate: f64,
    pub eta_hat: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Fixed forget rates swept by [`ablate_forget_rates`].
pub const ABLATION_FIXED_RATES: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];

/// Run the pipeline once per fixed forget rate {0, 0.1, 0.2, 0.3, 0.4} and
/// once with the estimated rate, all from the same seed, and collect one
/// accuracy row per configuration.
pub fn ablate_forget_rates(
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    cfg: &RunConfig,
    estimator: &EstimatorModel,
    corruption: Option<&CorruptionRecord>,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(ABLATION_FIXED_RATES.len() + 1);
    let configs = ABLATION_FIXED_RATES
        .iter()
        .map(|&r| (format!("fixed-{r:.1}"), Some(r)))
        .chain(std::iter::once(("estimated".to_string(), None)));
    for (label, rate) in configs {
        let mut run_cfg = cfg.clone();
        run_cfg.forget_rate_override = rate;
        let report = run_pipeline(train, val, test, &run_cfg, estimator, corruption)?;
        rows.push(AblationRow {
            config: label,
            forget_rate: report.forget_rate.expect("pipeline reports carry a forget rate"),
            eta_hat: report.eta_hat.expect("pipeline reports carry an estimate"),
            accuracy: report.metrics.accuracy,
            macro_f1: report.metrics.macro_f1,
        });
    }
    Ok(rows)
}

/// Write the per-epoch curves as CSV: epoch, phase, train_loss, val_acc.
pub fn write_curves_csv(path: &Path, curves: &[CurvePoint]) -> Result<()> {
    let mut text = String::from("epoch,phase,train_loss,val_acc\n");
    for p in curves {
        text.push_str(&format!("{},{},{},{}\n", p.epoch, p.phase, p.train_loss, p.val_accuracy));
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

/// Write the ablation grid as CSV: config, forget_rate, eta_hat, accuracy,
/// macro_f1.
pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut text = String::from("config,forget_rate,eta_hat,accuracy,macro_f1\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.config, r.forget_rate, r.eta_hat, r.accuracy, r.macro_f1
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Split, SyntheticSpec};
    use crate::estimator::{EstimatorModel, HISTOGRAM_BINS};

    fn desk_config(seed: u64) -> RunConfig {
        RunConfig {
            phase1_epochs: 5,
            phase2_epochs: 2,
            phase3_epochs: 5,
            batch_size: 16,
            phase2_batch_size: 8,
            lr: 0.05,
            model_spec: Some(MlpSpec::new(vec![2, 16, 8, 2], seed ^ 1).unwrap()),
            seed,
            ..Default::default()
        }
    }

    fn constant_estimator(bias: f64) -> EstimatorModel {
        let p = HISTOGRAM_BINS + 2;
        EstimatorModel {
            weights: vec![0.0; p],
            bias,
            feature_means: vec![0.0; p],
            feature_scales: vec![1.0; p],
            j: HISTOGRAM_BINS,
        }
    }

    fn toy_dataset(seed: u64) -> Dataset {
        generate_synthetic(&SyntheticSpec {
            n: 60,
            c: 2,
            feature_dim: 2,
            cluster_spread: 0.06,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn zero_epoch_pretrain_returns_initial_params() {
        let d = toy_dataset(1);
        let mut cfg = desk_config(3);
        cfg.phase1_epochs = 0;
        let (params, losses) = phase1_pretrain(&d, &cfg).unwrap();
        let fresh = init_params(&cfg.resolved_model_spec(2, 2).unwrap()).unwrap();
        assert_eq!(params, fresh);
        assert_eq!(losses.len(), d.n());
    }

    #[test]
    fn pretrain_reduces_mean_loss_and_is_deterministic() {
        let d = toy_dataset(2);
        let cfg = desk_config(4);
        let (_, losses_a) = phase1_pretrain(&d, &cfg).unwrap();
        let (_, losses_b) = phase1_pretrain(&d, &cfg).unwrap();
        assert_eq!(losses_a, losses_b);

        let mut cfg0 = cfg.clone();
        cfg0.phase1_epochs = 0;
        let (_, initial) = phase1_pretrain(&d, &cfg0).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&losses_a) < mean(&initial));
    }

    #[test]
    fn selection_removes_the_highest_losses_first() {
        let d = toy_dataset(5);
        let mut cfg = desk_config(5);
        cfg.forget_rate_override = Some(1.0 / 3.0);
        let mut losses = vec![0.0; d.n()];
        losses[0] = 3.0;
        losses[1] = 1.0;
        losses[2] = 2.0;
        // n=60, k=1/3 -> 20 removed; indices 0 and 2 carry the top losses and
        // zero-loss ties resolve toward lower indices.
        let sel = phase2_select(&d, &losses, &cfg, &constant_estimator(0.0)).unwrap();
        assert_eq!(sel.removed_indices.len(), 20);
        assert!(sel.removed_indices.contains(&0));
        assert!(sel.removed_indices.contains(&2));
        assert_eq!(sel.forget_rate, 1.0 / 3.0);

        // Partition invariants.
        assert_eq!(sel.kept_indices.len() + sel.removed_indices.len(), d.n());
        let max_kept =
            sel.kept_indices.iter().map(|&i| losses[i]).fold(f64::NEG_INFINITY, f64::max);
        let min_removed =
            sel.removed_indices.iter().map(|&i| losses[i]).fold(f64::INFINITY, f64::min);
        assert!(min_removed >= max_kept);
    }

    #[test]
    fn small_estimate_clamps_forget_rate_to_zero() {
        let d = toy_dataset(6);
        let cfg = desk_config(6);
        let losses = vec![1.0; d.n()];
        let sel = phase2_select(&d, &losses, &cfg, &constant_estimator(0.03)).unwrap();
        assert_eq!(sel.forget_rate, 0.0);
        assert!(sel.removed_indices.is_empty());
        assert!((sel.eta_hat - 0.03).abs() < 1e-12);
    }

    #[test]
    fn perfectly_ordered_losses_give_exact_precision() {
        let d = toy_dataset(7);
        let n = d.n();
        let noisy_count = 24; // 0.4 of 60
        let mut losses = vec![0.5; n];
        let mut flipped = vec![false; n];
        for i in 0..noisy_count {
            losses[i] = 5.0 + i as f64; // all noisy losses above all clean ones
            flipped[i] = true;
        }
        let mut cfg = desk_config(8);
        cfg.forget_rate_override = Some(0.4);
        let sel = phase2_select(&d, &losses, &cfg, &constant_estimator(0.0)).unwrap();
        assert_eq!(sel.removed_indices.len(), 24);
        let hits = sel.removed_indices.iter().filter(|&&i| flipped[i]).count();
        assert_eq!(hits, sel.removed_indices.len(), "precision must be exactly 1");
    }

    #[test]
    fn phase3_trains_clean_data_to_high_accuracy() {
        let d = toy_dataset(9);
        let mut cfg = desk_config(10);
        cfg.phase3_epochs = 40;
        let params = phase3_train(&d, &cfg, None).unwrap();
        let acc = crate::trainer::accuracy(&params, &d, cfg.objective.tau).unwrap();
        assert!(acc >= 0.95, "train accuracy {acc}");
    }

    #[test]
    fn phase3_zero_epochs_returns_warm_params_unchanged() {
        let d = toy_dataset(11);
        let mut cfg = desk_config(12);
        cfg.phase3_epochs = 0;
        cfg.reinit_phase3 = false;
        let (warm, _) = phase1_pretrain(&d, &cfg).unwrap();
        let out = phase3_train(&d, &cfg, Some(&warm)).unwrap();
        assert_eq!(out, warm);
        // The warm-start objective value equals a frozen-weights evaluation.
        let frozen_mean = |p: &ModelParams| -> f64 {
            d.samples
                .iter()
                .map(|s| {
                    let (probs, _) =
                        crate::model::forward(p, &s.features, cfg.objective.tau).unwrap();
                    crate::objective::total_loss(&probs, s.observed_label, &cfg.objective)
                        .unwrap()
                })
                .sum::<f64>()
                / d.n() as f64
        };
        assert_eq!(frozen_mean(&warm).to_bits(), frozen_mean(&out).to_bits());
    }

    #[test]
    fn phase3_without_warm_params_is_a_usage_error() {
        let d = toy_dataset(13);
        let mut cfg = desk_config(14);
        cfg.reinit_phase3 = false;
        assert!(matches!(phase3_train(&d, &cfg, None), Err(Error::Usage(_))));
    }

    #[test]
    fn pipeline_reports_are_bit_identical_across_runs() {
        let base = toy_dataset(15);
        let val = toy_dataset(16).with_split(Split::Validation);
        let test = toy_dataset(17).with_split(Split::Test);
        let cfg = desk_config(18);
        let est = constant_estimator(0.2);
        let a = run_pipeline(&base, &val, &test, &cfg, &est, None).unwrap();
        let b = run_pipeline(&base, &val, &test, &cfg, &est, None).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.mode, "pipeline");
        assert!(a.selection.is_some());
        assert_eq!(a.curves.len(), cfg.total_epochs());
    }

    #[test]
    fn baseline_reports_omit_the_selection_block() {
        let base = toy_dataset(19);
        let val = toy_dataset(20).with_split(Split::Validation);
        let test = toy_dataset(21).with_split(Split::Test);
        let cfg = desk_config(22);
        let report = run_baseline(&base, &val, &test, &cfg).unwrap();
        assert_eq!(report.mode, "baseline");
        assert!(report.selection.is_none());
        assert!(report.eta_hat.is_none());
        assert!(!report.to_json().contains("\"selection\""));
    }

    #[test]
    fn inconsistent_splits_are_rejected() {
        let base = toy_dataset(23);
        let val = generate_synthetic(&SyntheticSpec {
            n: 30,
            c: 3,
            feature_dim: 2,
            cluster_spread: 0.1,
            seed: 1,
        })
        .unwrap()
        .with_split(Split::Validation);
        let test = toy_dataset(24).with_split(Split::Test);
        let cfg = desk_config(25);
        let err = run_baseline(&base, &val, &test, &cfg).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }
}
