//! Symmetric and asymmetric label corruption with a per-sample flip ledger.
//!
//! Corruption is exact-count: exactly `round(rate * n)` samples are chosen
//! uniformly without replacement and flipped, so realized rates match the
//! requested rate for every seed and estimator training targets are exact.
//! Only train splits may be corrupted; validation and test stay clean.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Flip to a label drawn uniformly from the other c-1 classes.
    Symmetric,
    /// Flip to the next class cyclically: `(old + 1) % c`.
    Asymmetric,
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseKind::Symmetric => write!(f, "symmetric"),
            NoiseKind::Asymmetric => write!(f, "asymmetric"),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    pub seed: u64,
}

/// Ground-truth ledger of what `inject_noise` did, used only by evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub flipped: Vec<bool>,
    pub original_label: Vec<usize>,
    pub realized_rate: f64,
}

impl CorruptionRecord {
    pub fn flipped_count(&self) -> usize {
        self.flipped.iter().filter(|&&f| f).count()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("record serialization cannot fail");
        std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        serde_json::from_str(&text).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })
    }
}

/// Corrupt exactly `round(rate * n)` observed labels of a train split.
///
/// `true_label` fields pass through untouched, and the returned ledger
/// records the pre-corruption label of every sample. For c = 2 the
/// asymmetric map degenerates to symmetric (the next class is the only
/// other class).
pub fn inject_noise(d: &Dataset, spec: &NoiseSpec) -> Result<(Dataset, CorruptionRecord)> {
    if d.split != Split::Train {
        return Err(Error::Usage(format!(
            "noise may only be injected into a train split, got {}",
            d.split
        )));
    }
    let bound = (d.c as f64 - 1.0) / d.c as f64;
    if !(0.0..bound).contains(&spec.rate) {
        return Err(Error::Argument(format!(
            "noise rate must lie in [0, (c-1)/c) = [0, {bound:.4}) for c={}, got {}",
            d.c, spec.rate
        )));
    }

    let n = d.n();
    let flip_count = (spec.rate * n as f64).round() as usize;

    let mut rng = Rng::from_seed(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);

    let mut noisy = d.clone();
    let mut flipped = vec![false; n];
    for &i in order.iter().take(flip_count) {
        let old = noisy.samples[i].observed_label;
        let new = match spec.kind {
            NoiseKind::Symmetric => {
                let r = rng.below(d.c as u64 - 1) as usize;
                if r >= old {
                    r + 1
                } else {
                    r
                }
            }
            NoiseKind::Asymmetric => (old + 1) % d.c,
        };
        noisy.samples[i].observed_label = new;
        flipped[i] = true;
    }

    let record = CorruptionRecord {
        flipped,
        original_label: d.samples.iter().map(|s| s.observed_label).collect(),
        realized_rate: flip_count as f64 / n as f64,
    };
    Ok((noisy, record))
}
