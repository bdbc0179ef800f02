//! Optional hyperparameter search over fixed search spaces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, Scaler, SelectionOptions};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::gcn::{train_gcn, GcnConfig, GcnTask};
use crate::graph::normalized_adjacency;
use crate::protocol::{SplitSpec, DEFAULT_TEST_FRACTION, DEFAULT_VAL_FRACTION};
use crate::seeding::derive_seed;

pub const GCN_HIDDEN: [usize; 3] = [32, 64, 128];
pub const GCN_DROPOUT: [f64; 3] = [0.2, 0.3, 0.5];
pub const GCN_LEARNING_RATE: [f64; 2] = [0.001, 0.01];
pub const GCN_WEIGHT_DECAY: [f64; 4] = [5e-4, 1e-4, 1e-5, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnTrial {
    pub config: GcnConfig,
    pub val_macro_f1: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub masking_rate: f64,
    pub seed: u64,
    pub gcn_trials: Vec<GcnTrial>,
    pub gcn_best: GcnConfig,
    pub logreg_cv: Vec<(f64, f64)>,
    pub logreg_best_c: f64,
    pub svm_cv: Vec<(f64, f64)>,
    pub svm_best_c: f64,
}

pub fn gcn_search_space() -> Vec<GcnConfig> {
    let mut out = Vec::new();
    for &hidden in &GCN_HIDDEN {
        for &dropout_rate in &GCN_DROPOUT {
            for &learning_rate in &GCN_LEARNING_RATE {
                for &weight_decay in &GCN_WEIGHT_DECAY {
                    out.push(GcnConfig {
                        hidden,
                        dropout_rate,
                        learning_rate,
                        weight_decay,
                        ..GcnConfig::default()
                    });
                }
            }
        }
    }
    out
}

/// Grid search for all three models on one split. GCN configurations are
/// ranked by validation macro-F1 (first in grid order wins ties); the
/// baselines use their cross-validated selection.
pub fn tune(dataset: &Dataset, masking_rate: f64, seed: u64) -> Result<TuneReport> {
    let split = SplitSpec::build(
        &dataset.labels,
        masking_rate,
        seed,
        DEFAULT_TEST_FRACTION,
        DEFAULT_VAL_FRACTION,
    )?;
    let adj = normalized_adjacency(&dataset.graph);
    let task = GcnTask {
        features: &dataset.features,
        labels: &dataset.labels,
        num_classes: dataset.num_classes,
        subtrain: &split.subtrain_idx,
        val: &split.val_idx,
    };
    let trials: Vec<GcnTrial> = gcn_search_space()
        .into_par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let cfg = GcnConfig {
                seed: derive_seed(seed, &["tune", &i.to_string()]),
                ..cfg
            };
            let trained = train_gcn(&cfg, &adj, &task)?;
            Ok(GcnTrial {
                config: cfg,
                val_macro_f1: trained.best_val_macro_f1,
                best_epoch: trained.best_epoch,
            })
        })
        .collect::<Result<_>>()?;
    let mut best = &trials[0];
    for t in &trials[1..] {
        if t.val_macro_f1 > best.val_macro_f1 {
            best = t;
        }
    }
    let gcn_best = best.config.clone();

    let xn = Scaler::fit(&dataset.features, &split.visible_idx)?.apply(&dataset.features)?;
    let lr = baselines::train_logreg(
        &xn,
        &dataset.labels,
        dataset.num_classes,
        &split.visible_idx,
        &SelectionOptions::logreg(derive_seed(seed, &["tune", "lr"])),
    )?;
    let svm = baselines::train_svm(
        &xn,
        &dataset.labels,
        dataset.num_classes,
        &split.visible_idx,
        &SelectionOptions::svm(derive_seed(seed, &["tune", "svm"])),
    )?;
    Ok(TuneReport {
        masking_rate,
        seed,
        gcn_trials: trials,
        gcn_best,
        logreg_cv: lr.cv_scores,
        logreg_best_c: lr.selected_c,
        svm_cv: svm.cv_scores,
        svm_best_c: svm.selected_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcn_space_matches_grid() {
        assert_eq!(GCN_HIDDEN, [32, 64, 128]);
        assert_eq!(GCN_DROPOUT, [0.2, 0.3, 0.5]);
        assert_eq!(GCN_LEARNING_RATE, [0.001, 0.01]);
        assert_eq!(GCN_WEIGHT_DECAY, [5e-4, 1e-4, 1e-5, 0.0]);
        assert_eq!(gcn_search_space().len(), 72);
    }
}
