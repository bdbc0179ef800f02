//! Per-class and macro F1, confusion matrices, ΔF1 and ablation retention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub per_class_f1: Vec<f64>,
    pub macro_f1: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    /// Classes that appear in neither predictions nor truth; their F1 is 0.
    pub absent_classes: Vec<usize>,
}

impl ModelScores {
    pub fn num_classes(&self) -> usize {
        self.per_class_f1.len()
    }
}

pub fn confusion_matrix(
    pred: &[usize],
    truth: &[usize],
    num_classes: usize,
) -> Result<Vec<Vec<u64>>> {
    if pred.len() != truth.len() {
        return Err(Error::dims("confusion_matrix", truth.len(), pred.len()));
    }
    let mut m = vec![vec![0u64; num_classes]; num_classes];
    for (node, (&p, &t)) in pred.iter().zip(truth).enumerate() {
        for label in [p, t] {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    node,
                    label,
                    num_classes,
                });
            }
        }
        m[t][p] += 1;
    }
    Ok(m)
}

fn f1_from_confusion(confusion: &[Vec<u64>], c: usize) -> f64 {
    let tp = confusion[c][c] as f64;
    let predicted: u64 = confusion.iter().map(|r| r[c]).sum();
    let actual: u64 = confusion[c].iter().sum();
    let denom = predicted + actual;
    if denom == 0 {
        0.0
    } else {
        // 2PR/(P+R) == 2TP/(predicted + actual)
        2.0 * tp / denom as f64
    }
}

/// Scores predictions over all `num_classes` classes.
pub fn score(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<ModelScores> {
    if truth.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let confusion = confusion_matrix(pred, truth, num_classes)?;
    Ok(scores_from_confusion(confusion))
}

pub fn scores_from_confusion(confusion: Vec<Vec<u64>>) -> ModelScores {
    let c = confusion.len();
    let per_class_f1: Vec<f64> = (0..c).map(|k| f1_from_confusion(&confusion, k)).collect();
    let absent_classes = (0..c)
        .filter(|&k| confusion[k].iter().sum::<u64>() == 0 && confusion.iter().all(|r| r[k] == 0))
        .collect();
    let macro_f1 = if c == 0 {
        0.0
    } else {
        per_class_f1.iter().sum::<f64>() / c as f64
    };
    ModelScores {
        per_class_f1,
        macro_f1,
        confusion,
        absent_classes,
    }
}

/// Macro F1 averaged only over classes present in `truth`. Used for model
/// selection on small validation sets where some classes may be missing.
pub fn macro_f1_present(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<f64> {
    let confusion = confusion_matrix(pred, truth, num_classes)?;
    let present: Vec<usize> = (0..num_classes)
        .filter(|&k| confusion[k].iter().sum::<u64>() > 0)
        .collect();
    if present.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    Ok(present
        .iter()
        .map(|&k| f1_from_confusion(&confusion, k))
        .sum::<f64>()
        / present.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaF1 {
    pub macro_delta: f64,
    pub per_class: Vec<f64>,
}

/// `F1_GCN − F1_LR`, positive when the graph model wins.
pub fn delta_f1(gcn: &ModelScores, baseline: &ModelScores) -> Result<DeltaF1> {
    if gcn.num_classes() != baseline.num_classes() {
        return Err(Error::dims(
            "delta_f1",
            gcn.num_classes(),
            baseline.num_classes(),
        ));
    }
    Ok(DeltaF1 {
        macro_delta: gcn.macro_f1 - baseline.macro_f1,
        per_class: gcn
            .per_class_f1
            .iter()
            .zip(&baseline.per_class_f1)
            .map(|(g, b)| g - b)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionPair {
    pub true_class: usize,
    pub predicted_class: usize,
    /// Share of the true class's evaluation nodes sent to `predicted_class`.
    pub rate: f64,
}

/// The `k` largest off-diagonal error rates, normalized by true-class totals.
/// Rows without evaluation nodes are skipped; zero-count cells are omitted.
pub fn top_confusion_pairs(confusion: &[Vec<u64>], k: usize) -> Vec<ConfusionPair> {
    let mut pairs = Vec::new();
    for (t, row) in confusion.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            continue;
        }
        for (p, &count) in row.iter().enumerate() {
            if p != t && count > 0 {
                pairs.push(ConfusionPair {
                    true_class: t,
                    predicted_class: p,
                    rate: count as f64 / total as f64,
                });
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.rate
            .total_cmp(&a.rate)
            .then(a.true_class.cmp(&b.true_class))
            .then(a.predicted_class.cmp(&b.predicted_class))
    });
    pairs.truncate(k);
    pairs
}

/// Error rate of one `(true, predicted)` cell.
pub fn pair_rate(confusion: &[Vec<u64>], true_class: usize, predicted_class: usize) -> Option<f64> {
    let total: u64 = confusion.get(true_class)?.iter().sum();
    (total > 0).then(|| confusion[true_class][predicted_class] as f64 / total as f64)
}

/// Ablated score as a percentage of the original; `None` when the original
/// is not positive.
pub fn retention(original: f64, ablated: f64) -> Option<f64> {
    (original > 0.0).then(|| 100.0 * ablated / original)
}
