//! Experimental protocol: stratified train/test splits, label masking,
//! validation carving, random-feature ablation, and the grid runner that
//! trains every (model, masking rate, feature mode, seed) cell.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, linear_predict, Scaler, SelectionOptions};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gcn::{gcn_predict, train_gcn, GcnConfig, GcnTask};
use crate::graph::{normalized_adjacency, NormAdj};
use crate::matrix::DenseMatrix;
use crate::metrics::{delta_f1, retention, score, DeltaF1, ModelScores};
use crate::seeding::{child_rng, derive_seed};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_VAL_FRACTION: f64 = 0.2;
pub const DEFAULT_MASKING_RATES: [f64; 3] = [0.0, 0.5, 0.9];

/// Balanced class weights `N / (K · count_c)` over the nodes in `idx`, where
/// `K` is the number of classes present there. Absent classes get 0.
pub fn class_weights(labels: &[usize], idx: &[usize], num_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; num_classes];
    for &i in idx {
        counts[labels[i]] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count().max(1) as f64;
    let n = idx.len() as f64;
    counts
        .into_iter()
        .map(|c| {
            if c == 0 {
                0.0
            } else {
                n / (present * c as f64)
            }
        })
        .collect()
}

fn group_by_class(labels: &[usize], idx: &[usize]) -> Vec<Vec<usize>> {
    let k = idx.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let mut groups = vec![Vec::new(); k];
    for &i in idx {
        groups[labels[i]].push(i);
    }
    groups
}

/// Stratified train/test split. Each class contributes
/// `round(count · test_fraction)` test nodes, clamped so both sides keep at
/// least one member. Returned index lists are sorted.
pub fn stratified_split(
    labels: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "test_fraction",
            reason: format!("{test_fraction} is outside (0, 1)"),
        });
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let groups = group_by_class(labels, &all);
    let mut rng = child_rng(seed, &["split"]);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in groups.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                required: 2,
            });
        }
        members.shuffle(&mut rng);
        let k =
            ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Hides a fraction `m` of training labels per class, keeping at least one
/// visible node per class. The per-class order depends only on the seed, so
/// the visible set at a higher masking rate is a subset of the one at a
/// lower rate.
pub fn apply_masking(
    train_idx: &[usize],
    labels: &[usize],
    m: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::InvalidParameter {
            name: "masking_rate",
            reason: format!("{m} is outside [0, 1)"),
        });
    }
    let mut rng = child_rng(seed, &["mask"]);
    let mut visible = Vec::new();
    for mut members in group_by_class(labels, train_idx) {
        if members.is_empty() {
            continue;
        }
        members.sort_unstable();
        members.shuffle(&mut rng);
        let keep = (((1.0 - m) * members.len() as f64).round() as usize).clamp(1, members.len());
        visible.extend_from_slice(&members[..keep]);
    }
    visible.sort_unstable();
    Ok(visible)
}

/// Splits visible labels into sub-train and validation sets, stratified.
/// Classes with a single visible node keep it in sub-train.
pub fn carve_validation(
    visible_idx: &[usize],
    labels: &[usize],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "val_fraction",
            reason: format!("{val_fraction} is outside (0, 1)"),
        });
    }
    let groups = group_by_class(labels, visible_idx);
    let present = groups.iter().filter(|g| !g.is_empty()).count();
    if visible_idx.len() < 2 * present {
        return Err(Error::InvalidParameter {
            name: "visible_idx",
            reason: format!(
                "{} visible labels cannot be carved for {present} classes (need at least {})",
                visible_idx.len(),
                2 * present
            ),
        });
    }
    let mut rng = child_rng(seed, &["validation"]);
    let mut subtrain = Vec::new();
    let mut val = Vec::new();
    for mut members in groups {
        if members.is_empty() {
            continue;
        }
        members.sort_unstable();
        members.shuffle(&mut rng);
        let k = if members.len() < 2 {
            0
        } else {
            ((members.len() as f64 * val_fraction).round() as usize).clamp(1, members.len() - 1)
        };
        val.extend_from_slice(&members[..k]);
        subtrain.extend_from_slice(&members[k..]);
    }
    subtrain.sort_unstable();
    val.sort_unstable();
    Ok((subtrain, val))
}

/// `n×d` matrix of i.i.d. standard normal entries.
pub fn ablate_features(n: usize, d: usize, seed: u64) -> DenseMatrix {
    let mut rng = child_rng(seed, &["ablation"]);
    let data = (0..n * d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    DenseMatrix::from_vec(n, d, data).expect("sized above")
}

/// All index sets for one seed and masking rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub masking_rate: f64,
    pub seed: u64,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub visible_idx: Vec<usize>,
    pub subtrain_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
}

impl SplitSpec {
    pub fn build(
        labels: &[usize],
        masking_rate: f64,
        seed: u64,
        test_fraction: f64,
        val_fraction: f64,
    ) -> Result<SplitSpec> {
        let (train_idx, test_idx) = stratified_split(labels, test_fraction, seed)?;
        Self::from_train_test(
            labels,
            train_idx,
            test_idx,
            masking_rate,
            seed,
            val_fraction,
        )
    }

    fn from_train_test(
        labels: &[usize],
        train_idx: Vec<usize>,
        test_idx: Vec<usize>,
        masking_rate: f64,
        seed: u64,
        val_fraction: f64,
    ) -> Result<SplitSpec> {
        let visible_idx = apply_masking(&train_idx, labels, masking_rate, seed)?;
        let (subtrain_idx, val_idx) = carve_validation(
            &visible_idx,
            labels,
            val_fraction,
            derive_seed(seed, &["rate", &format!("{masking_rate}")]),
        )?;
        Ok(SplitSpec {
            masking_rate,
            seed,
            train_idx,
            test_idx,
            visible_idx,
            subtrain_idx,
            val_idx,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Lr,
    Svm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Lr => "lr",
            ModelKind::Svm => "svm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gcn" => Ok(ModelKind::Gcn),
            "lr" | "logreg" => Ok(ModelKind::Lr),
            "svm" => Ok(ModelKind::Svm),
            other => Err(format!("unknown model `{other}` (expected gcn, lr or svm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Original,
    /// i.i.d. N(0, 1) features drawn once per seed.
    Random,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Original => "original",
            FeatureMode::Random => "random",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" => Ok(FeatureMode::Original),
            "random" => Ok(FeatureMode::Random),
            other => Err(format!(
                "unknown feature mode `{other}` (expected original or random)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub models: Vec<ModelKind>,
    pub masking_rates: Vec<f64>,
    pub feature_modes: Vec<FeatureMode>,
    pub seeds: Vec<u64>,
    /// GCN hyperparameters; the seed field is replaced per cell.
    pub gcn: GcnConfig,
    pub test_fraction: f64,
    pub val_fraction: f64,
    pub folds: usize,
    pub logreg_grid: Vec<f64>,
    pub svm_grid: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            models: vec![ModelKind::Gcn, ModelKind::Lr, ModelKind::Svm],
            masking_rates: DEFAULT_MASKING_RATES.to_vec(),
            feature_modes: vec![FeatureMode::Original],
            seeds: vec![0],
            gcn: GcnConfig::default(),
            test_fraction: DEFAULT_TEST_FRACTION,
            val_fraction: DEFAULT_VAL_FRACTION,
            folds: baselines::DEFAULT_FOLDS,
            logreg_grid: baselines::LOGREG_C_GRID.to_vec(),
            svm_grid: baselines::SVM_C_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDetails {
    pub num_train: usize,
    pub num_test: usize,
    pub num_visible: usize,
    pub num_subtrain: usize,
    pub num_val: usize,
    /// Regularization value picked by cross-validation (baselines).
    pub selected_c: Option<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_epoch: Option<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: ModelKind,
    pub masking_rate: f64,
    pub feature_mode: FeatureMode,
    /// Base seed of the replicate this cell belongs to.
    pub seed: u64,
    /// Seed driving this cell's own randomness.
    pub cell_seed: u64,
    pub scores: Option<ModelScores>,
    pub details: Option<CellDetails>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub seed: u64,
    pub masking_rate: f64,
    pub feature_mode: FeatureMode,
    pub baseline: ModelKind,
    pub delta: DeltaF1,
}

/// Seed-averaged scores of one (model, masking rate, feature mode) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub masking_rate: f64,
    pub feature_mode: FeatureMode,
    pub num_seeds: usize,
    pub mean_macro_f1: f64,
    pub mean_per_class_f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub model: ModelKind,
    pub masking_rate: f64,
    pub original_macro_f1: f64,
    pub random_macro_f1: f64,
    /// Percentage; `None` when the original score is zero.
    pub retention_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset_name: String,
    pub dataset_fingerprint: String,
    pub num_classes: usize,
    pub config: GridConfig,
    pub cells: Vec<CellResult>,
    pub deltas: Vec<DeltaRecord>,
    pub summary: Vec<SummaryRow>,
    pub retention: Vec<RetentionRow>,
}

/// Seed of one grid cell: the base seed mixed with the cell coordinates.
pub fn cell_seed(base: u64, model: ModelKind, masking_rate: f64, mode: FeatureMode) -> u64 {
    derive_seed(
        base,
        &[
            "cell",
            model.as_str(),
            &format!("{masking_rate}"),
            mode.as_str(),
        ],
    )
}

fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

struct CellInputs<'a> {
    adj: &'a NormAdj,
    features: &'a DenseMatrix,
    labels: &'a [usize],
    num_classes: usize,
    split: &'a SplitSpec,
}

fn run_cell(
    cfg: &GridConfig,
    model: ModelKind,
    cell_seed: u64,
    inp: &CellInputs<'_>,
) -> Result<(ModelScores, CellDetails)> {
    let split = inp.split;
    let mut details = CellDetails {
        num_train: split.train_idx.len(),
        num_test: split.test_idx.len(),
        num_visible: split.visible_idx.len(),
        num_subtrain: split.subtrain_idx.len(),
        num_val: split.val_idx.len(),
        selected_c: None,
        best_epoch: None,
        stopped_epoch: None,
        warnings: Vec::new(),
    };
    let pred = match model {
        ModelKind::Gcn => {
            let gcn_cfg = GcnConfig {
                seed: cell_seed,
                ..cfg.gcn.clone()
            };
            let trained = train_gcn(
                &gcn_cfg,
                inp.adj,
                &GcnTask {
                    features: inp.features,
                    labels: inp.labels,
                    num_classes: inp.num_classes,
                    subtrain: &split.subtrain_idx,
                    val: &split.val_idx,
                },
            )?;
            details.best_epoch = Some(trained.best_epoch);
            details.stopped_epoch = Some(trained.stopped_epoch);
            details.warnings = trained.warnings;
            gcn_predict(&trained.params, inp.adj, inp.features)?
        }
        ModelKind::Lr | ModelKind::Svm => {
            let scaler = Scaler::fit(inp.features, &split.visible_idx)?;
            let xn = scaler.apply(inp.features)?;
            let sel = SelectionOptions {
                grid: if model == ModelKind::Lr {
                    cfg.logreg_grid.clone()
                } else {
                    cfg.svm_grid.clone()
                },
                folds: cfg.folds,
                seed: cell_seed,
            };
            let fitted = if model == ModelKind::Lr {
                baselines::train_logreg(&xn, inp.labels, inp.num_classes, &split.visible_idx, &sel)?
            } else {
                baselines::train_svm(&xn, inp.labels, inp.num_classes, &split.visible_idx, &sel)?
            };
            details.selected_c = Some(fitted.selected_c);
            linear_predict(&fitted, &xn)?
        }
    };
    let test_pred: Vec<usize> = split.test_idx.iter().map(|&v| pred[v]).collect();
    let truth: Vec<usize> = split.test_idx.iter().map(|&v| inp.labels[v]).collect();
    let scores = score(&test_pred, &truth, inp.num_classes)?;
    if !scores.absent_classes.is_empty() {
        details.warnings.push(format!(
            "classes {:?} absent from test predictions and truth; F1 set to 0",
            scores.absent_classes
        ));
    }
    Ok((scores, details))
}

/// Trains and evaluates every grid cell. Cells of one seed share the test set
/// and the random feature draw. A failing cell is recorded with its error
/// and does not stop the grid.
pub fn run_grid(dataset: &Dataset, cfg: &GridConfig) -> Result<ExperimentResult> {
    if cfg.models.is_empty()
        || cfg.masking_rates.is_empty()
        || cfg.feature_modes.is_empty()
        || cfg.seeds.is_empty()
    {
        return Err(Error::Empty("grid axis"));
    }
    for &m in &cfg.masking_rates {
        if !(0.0..1.0).contains(&m) {
            return Err(Error::InvalidParameter {
                name: "masking_rate",
                reason: format!("{m} is outside [0, 1)"),
            });
        }
    }
    cfg.gcn.validate()?;
    let adj = normalized_adjacency(&dataset.graph);
    let labels = &dataset.labels;
    let mut cells = Vec::new();

    for &seed in &cfg.seeds {
        let (train_idx, test_idx) = stratified_split(labels, cfg.test_fraction, seed)?;
        let splits: Vec<Result<SplitSpec>> = cfg
            .masking_rates
            .iter()
            .map(|&m| {
                SplitSpec::from_train_test(
                    labels,
                    train_idx.clone(),
                    test_idx.clone(),
                    m,
                    seed,
                    cfg.val_fraction,
                )
            })
            .collect();
        let random = cfg.feature_modes.contains(&FeatureMode::Random).then(|| {
            ablate_features(
                dataset.num_nodes(),
                dataset.feature_dim(),
                derive_seed(seed, &["features"]),
            )
        });

        let mut jobs = Vec::new();
        for (mi, &m) in cfg.masking_rates.iter().enumerate() {
            for &mode in &cfg.feature_modes {
                for &model in &cfg.models {
                    jobs.push((mi, m, mode, model));
                }
            }
        }
        let seed_cells: Vec<CellResult> = jobs
            .par_iter()
            .map(|&(mi, m, mode, model)| {
                let cs = cell_seed(seed, model, m, mode);
                let outcome = splits[mi]
                    .as_ref()
                    .map_err(|e| e.to_string())
                    .and_then(|split| {
                        let features = match mode {
                            FeatureMode::Original => &dataset.features,
                            FeatureMode::Random => random.as_ref().expect("drawn when requested"),
                        };
                        let inp = CellInputs {
                            adj: &adj,
                            features,
                            labels,
                            num_classes: dataset.num_classes,
                            split,
                        };
                        run_cell(cfg, model, cs, &inp).map_err(|e| e.to_string())
                    });
                let (scores, details, error) = match outcome {
                    Ok((s, d)) => (Some(s), Some(d), None),
                    Err(e) => (None, None, Some(e)),
                };
                CellResult {
                    model,
                    masking_rate: m,
                    feature_mode: mode,
                    seed,
                    cell_seed: cs,
                    scores,
                    details,
                    error,
                }
            })
            .collect();
        cells.extend(seed_cells);
    }

    let deltas = compute_deltas(&cells)?;
    let summary = summarize(&cells, cfg);
    let retention = retention_rows(&summary);
    Ok(ExperimentResult {
        dataset_name: dataset.name.clone(),
        dataset_fingerprint: dataset.fingerprint(),
        num_classes: dataset.num_classes,
        config: cfg.clone(),
        cells,
        deltas,
        summary,
        retention,
    })
}

impl ExperimentResult {
    pub fn cell(
        &self,
        seed: u64,
        model: ModelKind,
        masking_rate: f64,
        mode: FeatureMode,
    ) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.seed == seed
                && c.model == model
                && c.feature_mode == mode
                && same_rate(c.masking_rate, masking_rate)
        })
    }

    pub fn summary_row(
        &self,
        model: ModelKind,
        masking_rate: f64,
        mode: FeatureMode,
    ) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| {
            r.model == model && r.feature_mode == mode && same_rate(r.masking_rate, masking_rate)
        })
    }

    /// Seed-averaged macro ΔF1 of GCN against `baseline`.
    pub fn mean_macro_delta(
        &self,
        baseline: ModelKind,
        masking_rate: f64,
        mode: FeatureMode,
    ) -> Option<f64> {
        let vals: Vec<f64> = self
            .deltas
            .iter()
            .filter(|d| {
                d.baseline == baseline
                    && d.feature_mode == mode
                    && same_rate(d.masking_rate, masking_rate)
            })
            .map(|d| d.delta.macro_delta)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn compute_deltas(cells: &[CellResult]) -> Result<Vec<DeltaRecord>> {
    let mut out = Vec::new();
    for gcn in cells.iter().filter(|c| c.model == ModelKind::Gcn) {
        let Some(gs) = &gcn.scores else { continue };
        for baseline in [ModelKind::Lr, ModelKind::Svm] {
            let other = cells.iter().find(|c| {
                c.model == baseline
                    && c.seed == gcn.seed
                    && c.feature_mode == gcn.feature_mode
                    && same_rate(c.masking_rate, gcn.masking_rate)
            });
            if let Some(bs) = other.and_then(|c| c.scores.as_ref()) {
                out.push(DeltaRecord {
                    seed: gcn.seed,
                    masking_rate: gcn.masking_rate,
                    feature_mode: gcn.feature_mode,
                    baseline,
                    delta: delta_f1(gs, bs)?,
                });
            }
        }
    }
    Ok(out)
}

fn summarize(cells: &[CellResult], cfg: &GridConfig) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &model in &cfg.models {
        for &m in &cfg.masking_rates {
            for &mode in &cfg.feature_modes {
                let scores: Vec<&ModelScores> = cells
                    .iter()
                    .filter(|c| {
                        c.model == model && c.feature_mode == mode && same_rate(c.masking_rate, m)
                    })
                    .filter_map(|c| c.scores.as_ref())
                    .collect();
                if scores.is_empty() {
                    continue;
                }
                let k = scores.len() as f64;
                let c = scores[0].num_classes();
                let mut per_class = vec![0.0; c];
                for s in &scores {
                    for (p, v) in per_class.iter_mut().zip(&s.per_class_f1) {
                        *p += v / k;
                    }
                }
                rows.push(SummaryRow {
                    model,
                    masking_rate: m,
                    feature_mode: mode,
                    num_seeds: scores.len(),
                    mean_macro_f1: scores.iter().map(|s| s.macro_f1).sum::<f64>() / k,
                    mean_per_class_f1: per_class,
                });
            }
        }
    }
    rows
}

fn retention_rows(summary: &[SummaryRow]) -> Vec<RetentionRow> {
    summary
        .iter()
        .filter(|r| r.feature_mode == FeatureMode::Original)
        .filter_map(|orig| {
            let rand = summary.iter().find(|r| {
                r.model == orig.model
                    && r.feature_mode == FeatureMode::Random
                    && same_rate(r.masking_rate, orig.masking_rate)
            })?;
            Some(RetentionRow {
                model: orig.model,
                masking_rate: orig.masking_rate,
                original_macro_f1: orig.mean_macro_f1,
                random_macro_f1: rand.mean_macro_f1,
                retention_pct: retention(orig.mean_macro_f1, rand.mean_macro_f1),
            })
        })
        .collect()
}
