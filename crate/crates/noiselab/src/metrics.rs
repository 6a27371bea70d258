//! Classification metrics: accuracy, macro-F1, one-vs-rest AUC, confusion.
//!
//! AUC uses the rank statistic with average ranks on ties, which equals the
//! pair-counting probability P(score_pos > score_neg) + 0.5 * P(tie). F1 is
//! macro-averaged (unweighted over classes) with the 0/0 := 0 convention,
//! the conservative choice for imbalanced datasets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_auc: Vec<f64>,
    pub mean_auc: f64,
    /// `confusion[actual][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
}

impl MetricSet {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("metrics serialization cannot fail");
        std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        serde_json::from_str(&text).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })
    }
}

/// Argmax with ties resolved to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Average ranks (1-based) with tied scores sharing the mean of their ranks.
fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // mean of 1-based ranks i+1 ..= j+1
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// One-vs-rest AUC for a score column via the Mann-Whitney rank statistic.
/// Returns 0.5 when the class has no positives or no negatives.
fn one_vs_rest_auc(scores: &[f64], is_positive: &[bool]) -> f64 {
    let pos = is_positive.iter().filter(|&&p| p).count();
    let neg = is_positive.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.5;
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 =
        ranks.iter().zip(is_positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    (rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos as f64 * neg as f64)
}

/// Compute the full metric set from an n x c probability matrix and labels.
pub fn compute_metrics(probs_matrix: &[Vec<f64>], true_labels: &[usize]) -> Result<MetricSet> {
    let n = probs_matrix.len();
    if n == 0 || n != true_labels.len() {
        return Err(Error::Argument(format!(
            "need matching nonempty rows and labels, got {n} rows and {} labels",
            true_labels.len()
        )));
    }
    let c = probs_matrix[0].len();
    if c < 2 {
        return Err(Error::Argument(format!("need at least 2 classes, got {c}")));
    }
    for (i, row) in probs_matrix.iter().enumerate() {
        if row.len() != c {
            return Err(Error::Argument(format!(
                "row {i} has {} entries, expected {c}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("row {i} holds non-finite probabilities")));
        }
    }
    if let Some(&bad) = true_labels.iter().find(|&&y| y >= c) {
        return Err(Error::Argument(format!("label {bad} out of range for c={c}")));
    }

    let mut confusion = vec![vec![0usize; c]; c];
    for (row, &y) in probs_matrix.iter().zip(true_labels) {
        confusion[y][argmax(row)] += 1;
    }
    let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
    let accuracy = correct as f64 / n as f64;

    let mut f1_sum = 0.0;
    for k in 0..c {
        let tp = confusion[k][k];
        let fp: usize = (0..c).filter(|&i| i != k).map(|i| confusion[i][k]).sum();
        let fn_: usize = (0..c).filter(|&j| j != k).map(|j| confusion[k][j]).sum();
        let denom = 2 * tp + fp + fn_;
        f1_sum += if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
    }
    let macro_f1 = f1_sum / c as f64;

    let mut per_class_auc = Vec::with_capacity(c);
    for k in 0..c {
        let scores: Vec<f64> = probs_matrix.iter().map(|row| row[k]).collect();
        let is_positive: Vec<bool> = true_labels.iter().map(|&y| y == k).collect();
        per_class_auc.push(one_vs_rest_auc(&scores, &is_positive));
    }
    let mean_auc = per_class_auc.iter().sum::<f64>() / c as f64;

    Ok(MetricSet { accuracy, macro_f1, per_class_auc, mean_auc, confusion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Independent oracle: AUC as explicit pair counting with half credit
    /// for ties.
    fn pair_counting_auc(scores: &[f64], is_positive: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &pi) in is_positive.iter().enumerate() {
            if !pi {
                continue;
            }
            for (j, &pj) in is_positive.iter().enumerate() {
                if pj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let labels = vec![0, 1, 2, 0, 1, 2];
        let probs: Vec<Vec<f64>> = labels
            .iter()
            .map(|&y| (0..3).map(|k| if k == y { 1.0 } else { 0.0 }).collect())
            .collect();
        let m = compute_metrics(&probs, &labels).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
        assert!(m.per_class_auc.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn uniform_predictions_on_balanced_binary_data() {
        let labels = vec![0, 1, 0, 1];
        let probs = vec![vec![0.5, 0.5]; 4];
        let m = compute_metrics(&probs, &labels).unwrap();
        // Argmax tie rule picks class 0 for every row.
        assert_eq!(m.accuracy, 0.5);
        assert!(m.per_class_auc.iter().all(|&a| a == 0.5));
    }

    // Expected values below come from the brute-force pair-counting oracle.
    #[test]
    fn four_sample_binary_auc_cases() {
        let scores = [0.9, 0.8, 0.3, 0.1];
        let probs: Vec<Vec<f64>> = scores.iter().map(|&s| vec![1.0 - s, s]).collect();
        let positive = |labels: &[usize]| labels.iter().map(|&y| y == 1).collect::<Vec<_>>();

        let m = compute_metrics(&probs, &[1, 1, 0, 0]).unwrap();
        assert_eq!(pair_counting_auc(&scores, &positive(&[1, 1, 0, 0])), 1.0);
        assert_eq!(m.per_class_auc[1], 1.0);

        let m = compute_metrics(&probs, &[1, 0, 1, 0]).unwrap();
        assert_eq!(pair_counting_auc(&scores, &positive(&[1, 0, 1, 0])), 0.75);
        assert_eq!(m.per_class_auc[1], 0.75);

        let m = compute_metrics(&probs, &[1, 0, 0, 1]).unwrap();
        assert_eq!(pair_counting_auc(&scores, &positive(&[1, 0, 0, 1])), 0.5);
        assert_eq!(m.per_class_auc[1], 0.5);
    }

    #[test]
    fn rank_auc_equals_pair_counting_on_random_instances() {
        let mut rng = Rng::from_seed(17);
        for trial in 0..300 {
            let n = 4 + (rng.below(30) as usize);
            // Quantized scores force plenty of ties.
            let scores: Vec<f64> =
                (0..n).map(|_| (rng.below(8) as f64) / 8.0).collect();
            let mut is_positive: Vec<bool> = (0..n).map(|_| rng.below(2) == 1).collect();
            if is_positive.iter().all(|&p| p) {
                is_positive[0] = false;
            }
            if is_positive.iter().all(|&p| !p) {
                is_positive[0] = true;
            }
            let fast = one_vs_rest_auc(&scores, &is_positive);
            let slow = pair_counting_auc(&scores, &is_positive);
            assert!((fast - slow).abs() <= 1e-12, "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn confusion_is_consistent_with_accuracy() {
        let mut rng = Rng::from_seed(23);
        let c = 3;
        let n = 200;
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c as u64) as usize).collect();
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut row: Vec<f64> = (0..c).map(|_| rng.next_f64() + 0.01).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
                row
            })
            .collect();
        let m = compute_metrics(&probs, &labels).unwrap();
        let total: usize = m.confusion.iter().flatten().sum();
        assert_eq!(total, n);
        let trace: usize = (0..c).map(|k| m.confusion[k][k]).sum();
        assert_eq!(m.accuracy, trace as f64 / n as f64);
    }

    #[test]
    fn metrics_are_invariant_under_sample_permutation() {
        let mut rng = Rng::from_seed(29);
        let n = 60;
        let labels: Vec<usize> = (0..n).map(|_| rng.below(3) as usize).collect();
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut row: Vec<f64> = (0..3).map(|_| rng.next_f64() + 0.01).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
                row
            })
            .collect();
        let base = compute_metrics(&probs, &labels).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let probs_p: Vec<Vec<f64>> = order.iter().map(|&i| probs[i].clone()).collect();
        let labels_p: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let perm = compute_metrics(&probs_p, &labels_p).unwrap();

        assert_eq!(base, perm);
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        assert!(compute_metrics(&[], &[]).is_err());
        assert!(compute_metrics(&[vec![0.5, 0.5]], &[0, 1]).is_err());
        assert!(compute_metrics(&[vec![0.5, 0.5], vec![0.3, 0.3, 0.4]], &[0, 1]).is_err());
        assert!(compute_metrics(&[vec![0.5, 0.5]], &[2]).is_err());
    }
}
