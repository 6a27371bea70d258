//! Loss functions and the sparse output regularizer, with analytic
//! derivatives with respect to the probability vector.
//!
//! The generalized cross entropy `(1 - p_y^q) / q` interpolates between
//! cross entropy (q -> 0) and MAE (q = 1). The penalty `lambda * sum_i p_i^p`
//! with p in (0, 1] is minimized at simplex vertices, pushing outputs toward
//! one-hot. Both terms read the same tempered-softmax output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to probabilities before logs and negative powers so losses
/// and gradients stay finite at the simplex boundary.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Gce,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    /// GCE interpolation exponent in (0, 1].
    #[serde(default = "default_q")]
    pub q: f64,
    /// Softmax temperature; smaller sharpens outputs toward one-hot.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Regularization weight, >= 0.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Penalty norm exponent in (0, 1].
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_loss_kind")]
    pub loss_kind: LossKind,
}

fn default_q() -> f64 {
    0.7
}
fn default_tau() -> f64 {
    0.5
}
fn default_lambda() -> f64 {
    0.1
}
fn default_p() -> f64 {
    0.1
}
fn default_loss_kind() -> LossKind {
    LossKind::Gce
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            q: default_q(),
            tau: default_tau(),
            lambda: default_lambda(),
            p: default_p(),
            loss_kind: default_loss_kind(),
        }
    }
}

impl ObjectiveConfig {
    /// Plain cross entropy at temperature 1 with no regularization, as used
    /// by pre-training and data-filter training.
    pub fn vanilla_ce() -> Self {
        ObjectiveConfig { q: 1.0, tau: 1.0, lambda: 0.0, p: 1.0, loss_kind: LossKind::Ce }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Argument(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Argument(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Argument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Argument(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Generalized cross entropy `(1 - p_y^q) / q`, valued in [0, 1/q].
pub fn gce_loss(probs: &[f64], y: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Argument(format!("q must lie in (0, 1], got {q}")));
    }
    let py = probs
        .get(y)
        .copied()
        .ok_or_else(|| Error::Argument(format!("label {y} out of range for {} classes", probs.len())))?;
    Ok((1.0 - py.max(PROB_FLOOR).powf(q)) / q)
}

/// Cross entropy `-ln(p_y)` with the probability floor.
pub fn ce_loss(probs: &[f64], y: usize) -> f64 {
    -probs[y].max(PROB_FLOOR).ln()
}

/// Sparsity penalty `lambda * sum_i p_i^p`.
///
/// No floor here: `x^p` is finite at zero for p > 0, and keeping the raw
/// values preserves the exact identities at p = 1 and at one-hot inputs.
pub fn lp_penalty(probs: &[f64], lambda: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Argument(format!("p must lie in (0, 1], got {p}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Argument(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(lambda * probs.iter().map(|&v| v.powf(p)).sum::<f64>())
}

/// Per-sample objective: GCE (or CE) plus the sparsity penalty. The batch
/// objective is the mean of this value over the batch.
pub fn total_loss(probs: &[f64], y: usize, cfg: &ObjectiveConfig) -> Result<f64> {
    cfg.validate()?;
    let data_term = match cfg.loss_kind {
        LossKind::Ce => ce_loss(probs, y),
        LossKind::Gce => gce_loss(probs, y, cfg.q)?,
    };
    Ok(data_term + lp_penalty(probs, cfg.lambda, cfg.p)?)
}

/// Analytic gradient of [`total_loss`] with respect to the probability
/// vector: `d GCE / d p_y = -p_y^(q-1)`, `d CE / d p_y = -1 / p_y`, and
/// `d penalty / d p_i = lambda * p * p_i^(p-1)`, all with the floor applied
/// before negative powers.
pub fn total_loss_grad(probs: &[f64], y: usize, cfg: &ObjectiveConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if y >= probs.len() {
        return Err(Error::Argument(format!(
            "label {y} out of range for {} classes",
            probs.len()
        )));
    }
    let mut grad = vec![0.0; probs.len()];
    let py = probs[y].max(PROB_FLOOR);
    grad[y] = match cfg.loss_kind {
        LossKind::Ce => -1.0 / py,
        LossKind::Gce => -py.powf(cfg.q - 1.0),
    };
    if cfg.lambda > 0.0 {
        for (g, &v) in grad.iter_mut().zip(probs) {
            *g += cfg.lambda * cfg.p * v.max(PROB_FLOOR).powf(cfg.p - 1.0);
        }
    }
    Ok(grad)
}
