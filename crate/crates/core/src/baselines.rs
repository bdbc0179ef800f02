//! Feature-only baselines: multinomial logistic regression and one-vs-rest
//! linear SVM, both with balanced class weights, z-scored inputs, and the
//! regularization strength picked by stratified k-fold macro-F1.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::metrics::macro_f1_present;
use crate::protocol::class_weights;
use crate::seeding::child_rng;

/// Regularization grid searched for logistic regression.
pub const LOGREG_C_GRID: [f64; 7] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
/// Regularization grid searched for the linear SVM.
pub const SVM_C_GRID: [f64; 7] = [0.0001, 0.001, 0.01, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_FOLDS: usize = 5;

/// Per-feature standardization fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant features store 1.
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &DenseMatrix, rows: &[usize]) -> Result<Scaler> {
        if rows.is_empty() {
            return Err(Error::Empty("visible rows for scaler"));
        }
        let d = x.cols();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for &r in rows {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for &r in rows {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Scaler { mean, std })
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::dims("Scaler::apply", self.mean.len(), x.cols()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Logreg,
    Svm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    /// `d×C`; columns of classes never seen in training stay zero.
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
    /// Classes that appeared in the training rows. Only these are predicted.
    pub active: Vec<bool>,
    pub selected_c: f64,
    /// `(C, mean fold macro-F1)` for every grid value tried.
    pub cv_scores: Vec<(f64, f64)>,
}

impl LinearModel {
    pub fn scores(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut s = x.matmul(&self.weights)?;
        for r in 0..s.rows() {
            for (v, b) in s.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(s)
    }
}

/// Row-wise argmax of `XW + b` over active classes, lowest class on ties.
pub fn linear_predict(model: &LinearModel, x: &DenseMatrix) -> Result<Vec<usize>> {
    if x.cols() != model.weights.rows() {
        return Err(Error::dims(
            "linear_predict",
            model.weights.rows(),
            x.cols(),
        ));
    }
    let s = model.scores(x)?;
    Ok((0..s.rows())
        .map(|r| {
            let row = s.row(r);
            let mut best: Option<usize> = None;
            for (k, &v) in row.iter().enumerate() {
                if model.active[k] && best.is_none_or(|b| v > row[b]) {
                    best = Some(k);
                }
            }
            best.unwrap_or(0)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// multinomial logistic regression

/// Optimizer settings for the logistic-regression solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub history: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 1000,
            grad_tol: 1e-6,
            history: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub objective: Vec<f64>,
    pub grad_norm: Vec<f64>,
}

struct LogregProblem<'a> {
    x: &'a DenseMatrix,
    rows: &'a [usize],
    targets: Vec<usize>,
    sample_weight: Vec<f64>,
    /// Compact class index -> original class.
    classes: Vec<usize>,
    c_reg: f64,
}

impl LogregProblem<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.x.cols(), self.classes.len())
    }

    /// Objective `(1/N)[Σ s_i CE_i + ‖W‖²/(2C)]` and gradient, parameters laid
    /// out as `d×K` weights followed by `K` biases.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (d, k) = self.dims();
        let n = self.rows.len() as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (w, b) = theta.split_at(d * k);
        let mut loss = 0.0;
        let mut z = vec![0.0; k];
        for (i, &r) in self.rows.iter().enumerate() {
            let xr = self.x.row(r);
            z.copy_from_slice(b);
            for (j, &xv) in xr.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (zk, wv) in z.iter_mut().zip(&w[j * k..(j + 1) * k]) {
                    *zk += xv * wv;
                }
            }
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            let s = self.sample_weight[i] / n;
            let t = self.targets[i];
            loss += s * (lse - z[t]);
            for zk in z.iter_mut() {
                *zk = s * (*zk - lse).exp();
            }
            z[t] -= s;
            let (gw, gb) = grad.split_at_mut(d * k);
            for (gbk, zk) in gb.iter_mut().zip(&z) {
                *gbk += zk;
            }
            for (j, &xv) in xr.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (g, zk) in gw[j * k..(j + 1) * k].iter_mut().zip(&z) {
                    *g += xv * zk;
                }
            }
        }
        let lam = 1.0 / (self.c_reg * n);
        let mut reg = 0.0;
        for (g, wv) in grad[..d * k].iter_mut().zip(w) {
            reg += wv * wv;
            *g += lam * wv;
        }
        loss + 0.5 * lam * reg
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// L-BFGS with Armijo backtracking. Every accepted step strictly decreases
/// the objective.
fn lbfgs(problem: &LogregProblem<'_>, theta: &mut [f64], opts: &SolverOptions) -> SolverTrace {
    let dim = theta.len();
    let mut grad = vec![0.0; dim];
    let mut f = problem.eval(theta, &mut grad);
    let mut trace = SolverTrace::default();
    trace.objective.push(f);
    trace.grad_norm.push(norm(&grad));

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut new_theta = vec![0.0; dim];
    let mut new_grad = vec![0.0; dim];

    for _ in 0..opts.max_iter {
        if norm(&grad) < opts.grad_tol {
            break;
        }
        // two-loop recursion
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alpha[i] = rho * dot(&s_hist[i], &dir);
            for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= alpha[i] * y;
            }
        }
        if m > 0 {
            let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for i in 0..m {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &dir);
            for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (alpha[i] - beta) * s;
            }
        }
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }
        let mut step = if m == 0 {
            1.0 / norm(&grad).max(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..60 {
            for ((nt, t), d) in new_theta.iter_mut().zip(theta.iter()).zip(&dir) {
                *nt = t + step * d;
            }
            let nf = problem.eval(&new_theta, &mut new_grad);
            if nf <= f + 1e-4 * step * slope && nf < f {
                let s: Vec<f64> = new_theta
                    .iter()
                    .zip(theta.iter())
                    .map(|(a, b)| a - b)
                    .collect();
                let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                if dot(&s, &y) > 1e-12 {
                    if s_hist.len() == opts.history {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                }
                theta.copy_from_slice(&new_theta);
                grad.copy_from_slice(&new_grad);
                f = nf;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.objective.push(f);
        trace.grad_norm.push(norm(&grad));
    }
    trace
}

/// Classes present among `rows`; at least two are required.
fn present_classes(labels: &[usize], rows: &[usize], num_classes: usize) -> Result<Vec<usize>> {
    let mut seen = vec![false; num_classes];
    for &r in rows {
        let l = labels[r];
        if l >= num_classes {
            return Err(Error::LabelOutOfRange {
                node: r,
                label: l,
                num_classes,
            });
        }
        seen[l] = true;
    }
    let classes: Vec<usize> = (0..num_classes).filter(|&c| seen[c]).collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    Ok(classes)
}

/// Fits logistic regression at a fixed regularization strength.
pub fn fit_logreg(
    x: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    rows: &[usize],
    c_reg: f64,
    opts: &SolverOptions,
) -> Result<(LinearModel, SolverTrace)> {
    if rows.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    let classes = present_classes(labels, rows, num_classes)?;
    let mut compact = vec![usize::MAX; num_classes];
    for (i, &c) in classes.iter().enumerate() {
        compact[c] = i;
    }
    let weights = class_weights(labels, rows, num_classes);
    let problem = LogregProblem {
        x,
        rows,
        targets: rows.iter().map(|&r| compact[labels[r]]).collect(),
        sample_weight: rows.iter().map(|&r| weights[labels[r]]).collect(),
        classes,
        c_reg,
    };
    let (d, k) = problem.dims();
    let mut theta = vec![0.0; d * k + k];
    let trace = lbfgs(&problem, &mut theta, opts);

    let mut w = DenseMatrix::zeros(d, num_classes);
    let mut bias = vec![0.0; num_classes];
    let mut active = vec![false; num_classes];
    for (ci, &c) in problem.classes.iter().enumerate() {
        active[c] = true;
        bias[c] = theta[d * k + ci];
        for j in 0..d {
            w.set(j, c, theta[j * k + ci]);
        }
    }
    Ok((
        LinearModel {
            kind: LinearKind::Logreg,
            weights: w,
            bias,
            active,
            selected_c: c_reg,
            cv_scores: Vec::new(),
        },
        trace,
    ))
}

// ---------------------------------------------------------------------------
// linear SVM

/// Constant appended to every row to carry the intercept in the dual solver.
const SVM_INTERCEPT_SCALE: f64 = 10.0;
const SVM_MAX_EPOCHS: usize = 1000;
const SVM_TOL: f64 = 1e-2;

/// One-vs-rest L1-loss linear SVM at a fixed `C`, solved by dual coordinate
/// descent: `min ½‖w‖² + C Σ s_i max(0, 1 − y_i(w·x_i + b))`.
pub fn fit_svm(
    x: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    rows: &[usize],
    c_reg: f64,
    seed: u64,
) -> Result<LinearModel> {
    if rows.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    let classes = present_classes(labels, rows, num_classes)?;
    let cw = class_weights(labels, rows, num_classes);
    let d = x.cols();
    let sq_norm: Vec<f64> = rows
        .iter()
        .map(|&r| {
            x.row(r).iter().map(|v| v * v).sum::<f64>() + SVM_INTERCEPT_SCALE * SVM_INTERCEPT_SCALE
        })
        .collect();
    let upper: Vec<f64> = rows.iter().map(|&r| c_reg * cw[labels[r]]).collect();

    let mut weights = DenseMatrix::zeros(d, num_classes);
    let mut bias = vec![0.0; num_classes];
    let mut active = vec![false; num_classes];
    let per_class: Vec<(usize, Vec<f64>, f64)> = classes
        .par_iter()
        .map(|&c| {
            let mut rng = child_rng(seed, &["svm", &c.to_string()]);
            let y: Vec<f64> = rows
                .iter()
                .map(|&r| if labels[r] == c { 1.0 } else { -1.0 })
                .collect();
            let mut alpha = vec![0.0; rows.len()];
            let mut w = vec![0.0; d];
            let mut wb = 0.0;
            let mut order: Vec<usize> = (0..rows.len()).collect();
            for _ in 0..SVM_MAX_EPOCHS {
                order.shuffle(&mut rng);
                let mut pg_max = f64::NEG_INFINITY;
                let mut pg_min = f64::INFINITY;
                for &i in &order {
                    let xr = x.row(rows[i]);
                    let g = y[i] * (dot(&w, xr) + wb * SVM_INTERCEPT_SCALE) - 1.0;
                    let pg = if alpha[i] == 0.0 {
                        g.min(0.0)
                    } else if alpha[i] == upper[i] {
                        g.max(0.0)
                    } else {
                        g
                    };
                    pg_max = pg_max.max(pg);
                    pg_min = pg_min.min(pg);
                    if pg.abs() > 1e-12 {
                        let old = alpha[i];
                        alpha[i] = (old - g / sq_norm[i]).clamp(0.0, upper[i]);
                        let delta = (alpha[i] - old) * y[i];
                        for (wv, xv) in w.iter_mut().zip(xr) {
                            *wv += delta * xv;
                        }
                        wb += delta * SVM_INTERCEPT_SCALE;
                    }
                }
                if pg_max - pg_min < SVM_TOL {
                    break;
                }
            }
            (c, w, wb * SVM_INTERCEPT_SCALE)
        })
        .collect();
    for (c, w, b) in per_class {
        active[c] = true;
        bias[c] = b;
        for (j, v) in w.into_iter().enumerate() {
            weights.set(j, c, v);
        }
    }
    Ok(LinearModel {
        kind: LinearKind::Svm,
        weights,
        bias,
        active,
        selected_c: c_reg,
        cv_scores: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// model selection

/// Stratified fold assignment over `rows`: each class is shuffled with the
/// seed and dealt round-robin. Returns one fold id per entry of `rows`.
pub fn stratified_folds(labels: &[usize], rows: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let num_classes = rows.iter().map(|&r| labels[r] + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &r) in rows.iter().enumerate() {
        by_class[labels[r]].push(i);
    }
    let mut rng = child_rng(seed, &["cv-folds"]);
    let mut assignment = vec![0; rows.len()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

/// Number of folds actually used: the requested count, capped by the size of
/// the smallest visible class, and at least 2.
pub fn effective_folds(labels: &[usize], rows: &[usize], requested: usize) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for &r in rows {
        *counts.entry(labels[r]).or_insert(0usize) += 1;
    }
    let smallest = counts.values().copied().min().unwrap_or(0);
    requested.min(smallest).max(2)
}

/// Mean held-out macro-F1 for every grid value, evaluated on the same
/// stratified folds.
fn cross_validate<F>(
    x: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    rows: &[usize],
    grid: &[f64],
    folds: usize,
    seed: u64,
    fit: F,
) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&[usize], f64) -> Result<LinearModel> + Sync,
{
    if grid.is_empty() {
        return Err(Error::Empty("regularization grid"));
    }
    let folds = effective_folds(labels, rows, folds);
    let assignment = stratified_folds(labels, rows, folds, seed);
    let split = |f: usize| -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut held = Vec::new();
        for (&r, &a) in rows.iter().zip(&assignment) {
            if a == f {
                held.push(r);
            } else {
                train.push(r);
            }
        }
        (train, held)
    };
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let fold_scores: Vec<Result<Option<f64>>> = cells
        .par_iter()
        .map(|&(g, f)| {
            let (train, held) = split(f);
            if held.is_empty() {
                return Ok(None);
            }
            let model = fit(&train, grid[g])?;
            let pred = linear_predict(&model, &x.select_rows(&held))?;
            let truth: Vec<usize> = held.iter().map(|&r| labels[r]).collect();
            macro_f1_present(&pred, &truth, num_classes).map(Some)
        })
        .collect();

    let mut sums = vec![(0.0, 0usize); grid.len()];
    for (&(g, _), s) in cells.iter().zip(fold_scores) {
        if let Some(v) = s? {
            sums[g].0 += v;
            sums[g].1 += 1;
        }
    }
    Ok(grid
        .iter()
        .zip(sums)
        .map(|(&c, (sum, k))| (c, if k == 0 { 0.0 } else { sum / k as f64 }))
        .collect())
}

/// Best grid value; earliest entry wins ties.
fn best_c(scores: &[(f64, f64)]) -> f64 {
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    best.0
}

/// Options shared by the two cross-validated trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOptions {
    pub grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl SelectionOptions {
    pub fn logreg(seed: u64) -> Self {
        SelectionOptions {
            grid: LOGREG_C_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            seed,
        }
    }

    pub fn svm(seed: u64) -> Self {
        SelectionOptions {
            grid: SVM_C_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            seed,
        }
    }
}

/// Logistic regression with `C` chosen by stratified k-fold macro-F1 and a
/// final refit on all `rows`.
pub fn train_logreg(
    x: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    rows: &[usize],
    sel: &SelectionOptions,
) -> Result<LinearModel> {
    present_classes(labels, rows, num_classes)?;
    let opts = SolverOptions::default();
    let cv_scores = cross_validate(
        x,
        labels,
        num_classes,
        rows,
        &sel.grid,
        sel.folds,
        sel.seed,
        |train, c| fit_logreg(x, labels, num_classes, train, c, &opts).map(|(m, _)| m),
    )?;
    let (mut model, _) = fit_logreg(x, labels, num_classes, rows, best_c(&cv_scores), &opts)?;
    model.cv_scores = cv_scores;
    Ok(model)
}

/// One-vs-rest linear SVM with `C` chosen by stratified k-fold macro-F1 and a
/// final refit on all `rows`.
pub fn train_svm(
    x: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    rows: &[usize],
    sel: &SelectionOptions,
) -> Result<LinearModel> {
    present_classes(labels, rows, num_classes)?;
    let cv_scores = cross_validate(
        x,
        labels,
        num_classes,
        rows,
        &sel.grid,
        sel.folds,
        sel.seed,
        |train, c| fit_svm(x, labels, num_classes, train, c, sel.seed),
    )?;
    let mut model = fit_svm(x, labels, num_classes, rows, best_c(&cv_scores), sel.seed)?;
    model.cv_scores = cv_scores;
    Ok(model)
}
