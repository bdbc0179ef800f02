//! Two-layer graph convolutional network with hand-written backpropagation.
//!
//! Forward pass: `Z = Â · drop(ReLU(Â · drop(X) · W0)) · W1`. Dropout uses
//! inverted scaling during training and is the identity at evaluation. The
//! objective is the class-weighted mean negative log-likelihood over the
//! labeled nodes plus `(weight_decay / 2) · (‖W0‖² + ‖W1‖²)`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormAdj;
use crate::matrix::DenseMatrix;
use crate::metrics::macro_f1_present;
use crate::protocol::class_weights;
use crate::seeding::{child_rng, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    pub hidden: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            hidden: 64,
            dropout_rate: 0.5,
            learning_rate: 0.01,
            weight_decay: 0.0,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.hidden == 0 {
            return bad("hidden", "must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate", "must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay", "must be non-negative");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs", "must be positive");
        }
        Ok(())
    }
}

/// Layer weights: `w0` is `d×h`, `w1` is `h×C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    pub w0: DenseMatrix,
    pub w1: DenseMatrix,
}

impl GcnParams {
    pub fn zeros(d: usize, hidden: usize, classes: usize) -> Self {
        GcnParams {
            w0: DenseMatrix::zeros(d, hidden),
            w1: DenseMatrix::zeros(hidden, classes),
        }
    }

    /// Glorot-uniform initialization.
    pub fn glorot(d: usize, hidden: usize, classes: usize, rng: &mut Rng) -> Self {
        let mut init = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            DenseMatrix::from_vec(rows, cols, data).expect("sized above")
        };
        let w0 = init(d, hidden);
        let w1 = init(hidden, classes);
        GcnParams { w0, w1 }
    }

    pub fn input_dim(&self) -> usize {
        self.w0.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w0.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.w1.cols()
    }

    pub fn squared_norm(&self) -> f64 {
        self.w0.squared_norm() + self.w1.squared_norm()
    }

    fn check(&self, a: &NormAdj, x: &DenseMatrix) -> Result<()> {
        if x.rows() != a.num_nodes() {
            return Err(Error::dims(
                "gcn_forward",
                format!("{} feature rows", a.num_nodes()),
                x.rows(),
            ));
        }
        if x.cols() != self.w0.rows() {
            return Err(Error::dims(
                "gcn_forward",
                format!("{} feature cols", self.w0.rows()),
                x.cols(),
            ));
        }
        if self.w0.cols() != self.w1.rows() {
            return Err(Error::dims(
                "gcn_forward",
                format!("W1 with {} rows", self.w0.cols()),
                self.w1.rows(),
            ));
        }
        Ok(())
    }
}

/// Source of inverted-scaling dropout masks.
#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f64,
    rng: Rng,
}

impl Dropout {
    pub fn new(rate: f64, rng: Rng) -> Self {
        Dropout { rate, rng }
    }

    /// Multiplicative mask: kept entries carry `1/(1-p)`, dropped ones 0.
    fn mask(&mut self, len: usize) -> Vec<f64> {
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        (0..len)
            .map(|_| {
                if self.rng.random::<f64>() < keep {
                    scale
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn apply(&mut self, m: &mut DenseMatrix) -> Option<Vec<f64>> {
        if self.rate == 0.0 {
            return None;
        }
        let mask = self.mask(m.rows() * m.cols());
        for (v, k) in m.as_mut_slice().iter_mut().zip(&mask) {
            *v *= k;
        }
        Some(mask)
    }
}

struct ForwardPass {
    /// Input after dropout; `None` when it equals `x`.
    input: Option<DenseMatrix>,
    pre_activation: DenseMatrix,
    hidden_mask: Option<Vec<f64>>,
    hidden: DenseMatrix,
    logits: DenseMatrix,
}

fn forward_pass(
    p: &GcnParams,
    a: &NormAdj,
    x: &DenseMatrix,
    mut dropout: Option<&mut Dropout>,
) -> Result<ForwardPass> {
    p.check(a, x)?;
    let input = match dropout.as_deref_mut() {
        Some(d) if d.rate > 0.0 => {
            let mut xd = x.clone();
            d.apply(&mut xd);
            Some(xd)
        }
        _ => None,
    };
    let xin = input.as_ref().unwrap_or(x);
    // Â(XW0) == (ÂX)W0; the right-hand order is cheaper when h < d
    let pre_activation = a.spmm(&xin.matmul(&p.w0)?)?;
    let mut hidden = pre_activation.clone();
    hidden.map_inplace(|v| v.max(0.0));
    let hidden_mask = dropout.and_then(|d| d.apply(&mut hidden));
    let logits = a.spmm(&hidden.matmul(&p.w1)?)?;
    Ok(ForwardPass {
        input,
        pre_activation,
        hidden_mask,
        hidden,
        logits,
    })
}

/// Logits `Z` (n×C). Pass `None` for evaluation mode.
pub fn gcn_forward(
    p: &GcnParams,
    a: &NormAdj,
    x: &DenseMatrix,
    dropout: Option<&mut Dropout>,
) -> Result<DenseMatrix> {
    Ok(forward_pass(p, a, x, dropout)?.logits)
}

/// Argmax of each logit row in evaluation mode, lowest class on ties.
pub fn gcn_predict(p: &GcnParams, a: &NormAdj, x: &DenseMatrix) -> Result<Vec<usize>> {
    let z = gcn_forward(p, a, x, None)?;
    Ok((0..z.rows()).map(|r| z.row_argmax(r)).collect())
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

/// Class-weighted mean NLL of `logits` over `labeled`, and its gradient with
/// respect to the logits.
pub fn weighted_nll(
    logits: &DenseMatrix,
    labels: &[usize],
    labeled: &[usize],
    class_weights: &[f64],
) -> Result<(f64, DenseMatrix)> {
    if labeled.is_empty() {
        return Err(Error::Empty("labeled node set"));
    }
    let c = logits.cols();
    if class_weights.len() != c {
        return Err(Error::dims(
            "weighted_nll",
            format!("{c} class weights"),
            class_weights.len(),
        ));
    }
    let total_weight: f64 = labeled.iter().map(|&v| class_weights[labels[v]]).sum();
    if !(total_weight > 0.0) {
        return Err(Error::InvalidParameter {
            name: "class_weights",
            reason: "labeled nodes carry zero total weight".into(),
        });
    }
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(logits.rows(), c);
    for &v in labeled {
        let y = labels[v];
        let w = class_weights[y] / total_weight;
        let lsm = log_softmax(logits.row(v));
        loss -= w * lsm[y];
        let g = grad.row_mut(v);
        for k in 0..c {
            g[k] += w * lsm[k].exp();
        }
        g[y] -= w;
    }
    Ok((loss, grad))
}

/// Inputs shared by loss evaluations on one training problem.
#[derive(Debug, Clone, Copy)]
pub struct LossProblem<'a> {
    pub adj: &'a NormAdj,
    pub features: &'a DenseMatrix,
    pub labels: &'a [usize],
    pub labeled: &'a [usize],
    pub class_weights: &'a [f64],
    pub weight_decay: f64,
}

/// Objective value and exact gradients with respect to `W0` and `W1`.
pub fn gcn_loss_and_grad(
    p: &GcnParams,
    problem: &LossProblem<'_>,
    dropout: Option<&mut Dropout>,
) -> Result<(f64, GcnParams)> {
    let LossProblem {
        adj,
        features,
        labels,
        labeled,
        class_weights,
        weight_decay,
    } = *problem;
    if labels.len() != adj.num_nodes() {
        return Err(Error::LabelCount {
            expected: adj.num_nodes(),
            actual: labels.len(),
        });
    }
    let fp = forward_pass(p, adj, features, dropout)?;
    let (nll, d_logits) = weighted_nll(&fp.logits, labels, labeled, class_weights)?;

    // Z = Â Q, Q = Hd W1; Â is symmetric so Âᵀ = Â
    let d_q = adj.spmm(&d_logits)?;
    let mut d_w1 = fp.hidden.t_matmul(&d_q)?;
    let mut d_hidden = d_q.matmul_t(&p.w1)?;
    if let Some(mask) = &fp.hidden_mask {
        for (g, k) in d_hidden.as_mut_slice().iter_mut().zip(mask) {
            *g *= k;
        }
    }
    for (g, &s) in d_hidden
        .as_mut_slice()
        .iter_mut()
        .zip(fp.pre_activation.as_slice())
    {
        if s <= 0.0 {
            *g = 0.0;
        }
    }
    let d_p = adj.spmm(&d_hidden)?;
    let xin = fp.input.as_ref().unwrap_or(features);
    let mut d_w0 = xin.t_matmul(&d_p)?;

    let mut loss = nll;
    if weight_decay > 0.0 {
        loss += 0.5 * weight_decay * p.squared_norm();
        for (g, w) in d_w0.as_mut_slice().iter_mut().zip(p.w0.as_slice()) {
            *g += weight_decay * w;
        }
        for (g, w) in d_w1.as_mut_slice().iter_mut().zip(p.w1.as_slice()) {
            *g += weight_decay * w;
        }
    }
    Ok((loss, GcnParams { w0: d_w0, w1: d_w1 }))
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, len: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let mut offset = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (i, (pv, &gv)) in p.iter_mut().zip(g.iter()).enumerate() {
                let j = offset + i;
                self.m[j] = self.beta1 * self.m[j] + (1.0 - self.beta1) * gv;
                self.v[j] = self.beta2 * self.v[j] + (1.0 - self.beta2) * gv * gv;
                let m_hat = self.m[j] / bc1;
                let v_hat = self.v[j] / bc2;
                *pv -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            offset += p.len();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedGcn {
    /// Snapshot from the epoch with the best validation macro-F1.
    pub params: GcnParams,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
    pub stopped_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub warnings: Vec<String>,
}

/// What `train_gcn` needs besides the config and the propagation operator.
#[derive(Debug, Clone, Copy)]
pub struct GcnTask<'a> {
    pub features: &'a DenseMatrix,
    pub labels: &'a [usize],
    pub num_classes: usize,
    pub subtrain: &'a [usize],
    pub val: &'a [usize],
}

/// Full-batch Adam training with early stopping on validation macro-F1.
///
/// Training stops once `patience` consecutive epochs fail to beat the best
/// score so far, or at `max_epochs`. The earliest epoch achieving the best
/// score supplies the returned parameters.
pub fn train_gcn(cfg: &GcnConfig, adj: &NormAdj, task: &GcnTask<'_>) -> Result<TrainedGcn> {
    cfg.validate()?;
    let GcnTask {
        features,
        labels,
        num_classes,
        subtrain,
        val,
    } = *task;
    if subtrain.is_empty() {
        return Err(Error::Empty("sub-train set"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set"));
    }

    let mut warnings = Vec::new();
    let mut in_val = vec![false; num_classes];
    for &v in val {
        in_val[labels[v]] = true;
    }
    let missing: Vec<usize> = (0..num_classes).filter(|&c| !in_val[c]).collect();
    if !missing.is_empty() {
        warnings.push(format!(
            "validation set lacks classes {missing:?}; validation macro-F1 averages present classes only"
        ));
    }

    let weights = class_weights(labels, subtrain, num_classes);
    let problem = LossProblem {
        adj,
        features,
        labels,
        labeled: subtrain,
        class_weights: &weights,
        weight_decay: cfg.weight_decay,
    };
    let mut params = GcnParams::glorot(
        features.cols(),
        cfg.hidden,
        num_classes,
        &mut child_rng(cfg.seed, &["gcn", "init"]),
    );
    let mut dropout = Dropout::new(cfg.dropout_rate, child_rng(cfg.seed, &["gcn", "dropout"]));
    let mut adam = Adam::new(
        cfg.learning_rate,
        params.w0.as_slice().len() + params.w1.as_slice().len(),
    );
    let val_truth: Vec<usize> = val.iter().map(|&v| labels[v]).collect();

    let mut best = params.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut stopped_epoch = cfg.max_epochs;

    for epoch in 1..=cfg.max_epochs {
        let (loss, grads) = gcn_loss_and_grad(&params, &problem, Some(&mut dropout))?;
        {
            let GcnParams { w0, w1 } = &mut params;
            adam.step(
                &mut [w0.as_mut_slice(), w1.as_mut_slice()],
                &[grads.w0.as_slice(), grads.w1.as_slice()],
            );
        }

        let pred = gcn_predict(&params, adj, features)?;
        let val_pred: Vec<usize> = val.iter().map(|&v| pred[v]).collect();
        let score = macro_f1_present(&val_pred, &val_truth, num_classes)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_macro_f1: score,
        });

        if score > best_score {
            best_score = score;
            best = params.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_epoch = epoch;
                break;
            }
        }
    }

    Ok(TrainedGcn {
        params: best,
        best_epoch,
        best_val_macro_f1: best_score,
        stopped_epoch,
        history,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalized_adjacency, Graph};

    fn single_node() -> NormAdj {
        normalized_adjacency(&Graph::from_edges(&[], 1).unwrap())
    }

    #[test]
    fn zero_weights_give_zero_logits() {
        let g = Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap();
        let a = normalized_adjacency(&g);
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![-1.0, 0.5]]);
        let z = gcn_forward(&GcnParams::zeros(2, 4, 3), &a, &x, None).unwrap();
        assert_eq!(z, DenseMatrix::zeros(3, 3));
        assert_eq!(
            gcn_predict(&GcnParams::zeros(2, 4, 3), &a, &x).unwrap(),
            vec![0, 0, 0]
        );
    }

    #[test]
    fn scalar_forward() {
        let p = GcnParams {
            w0: DenseMatrix::from_rows(&[vec![3.0]]),
            w1: DenseMatrix::from_rows(&[vec![0.5]]),
        };
        let z = gcn_forward(
            &p,
            &single_node(),
            &DenseMatrix::from_rows(&[vec![2.0]]),
            None,
        )
        .unwrap();
        assert_eq!(z.get(0, 0), 3.0);
    }

    #[test]
    fn forward_rejects_bad_dims() {
        let p = GcnParams::zeros(3, 2, 2);
        let x = DenseMatrix::zeros(1, 2);
        assert!(matches!(
            gcn_forward(&p, &single_node(), &x, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn uniform_logits_give_log_c() {
        let z = DenseMatrix::zeros(4, 5);
        let (loss, _) = weighted_nll(&z, &[0, 1, 2, 3], &[0, 1, 2, 3], &[1.0; 5]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_give_near_zero_loss() {
        let z = DenseMatrix::from_rows(&[vec![50.0, 0.0], vec![0.0, 50.0]]);
        let (loss, _) = weighted_nll(&z, &[0, 1], &[0, 1], &[1.0, 3.0]).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn empty_labeled_set_is_an_error() {
        let z = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            weighted_nll(&z, &[0, 1], &[], &[1.0, 1.0]),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn predict_tie_goes_to_lowest_class() {
        // W1 columns identical -> equal logits
        let p = GcnParams {
            w0: DenseMatrix::from_rows(&[vec![1.0]]),
            w1: DenseMatrix::from_rows(&[vec![0.5, 0.5]]),
        };
        let pred = gcn_predict(&p, &single_node(), &DenseMatrix::from_rows(&[vec![1.0]])).unwrap();
        assert_eq!(pred, vec![0]);
    }

    #[test]
    fn dropout_mask_scaling() {
        let mut d = Dropout::new(0.5, child_rng(1, &["t"]));
        let mask = d.mask(10_000);
        assert!(mask.iter().all(|&k| k == 0.0 || k == 2.0));
        let mean = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((mean - 1.0).abs() < 0.05);
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = GcnConfig::default();
        assert_eq!((c.hidden, c.max_epochs, c.patience), (64, 200, 10));
        assert_eq!(
            (c.dropout_rate, c.learning_rate, c.weight_decay),
            (0.5, 0.01, 0.0)
        );
        assert!(GcnConfig {
            dropout_rate: 1.0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(GcnConfig { hidden: 0, ..c }.validate().is_err());
    }
}
