//! Central finite-difference check of the GCN gradients on random instances.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gcn::{gcn_loss_and_grad, GcnParams, LossProblem};
use crate::graph::{normalized_adjacency, Graph};
use crate::matrix::DenseMatrix;
use crate::protocol::class_weights;
use crate::seeding::child_rng;

/// Step of the five-point central stencil.
pub const FD_STEP: f64 = 1e-3;
pub const REL_TOL: f64 = 1e-5;
/// Coordinates whose analytic and numeric values are both below this are
/// not compared: the stencil's roundoff floor is about 1e-12, which is
/// already a 1e-5 relative error at this magnitude.
pub const MIN_MAGNITUDE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCheck {
    pub n: usize,
    pub d: usize,
    pub hidden: usize,
    pub classes: usize,
    pub coordinates_checked: usize,
    /// First-layer coordinates whose stencil crosses a ReLU kink.
    pub coordinates_at_kink: usize,
    pub max_rel_error: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub instances: Vec<InstanceCheck>,
    pub max_rel_error: f64,
    pub passed: bool,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// A random problem with `n ≤ 20`, `d ≤ 8`, `h ≤ 6`, `C ≤ 4`.
pub struct RandomInstance {
    pub graph: Graph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub labeled: Vec<usize>,
    pub params: GcnParams,
    pub weight_decay: f64,
}

pub fn random_instance(seed: u64) -> Result<RandomInstance> {
    let mut rng = child_rng(seed, &["gradcheck"]);
    let n = rng.random_range(2..=20);
    let d = rng.random_range(1..=8);
    let h = rng.random_range(1..=6);
    let c = rng.random_range(2..=4);
    let m = rng.random_range(0..=2 * n);
    let edges: Vec<(usize, usize)> = (0..m)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    let graph = Graph::from_edges(&edges, n)?;
    let mut normal = |rows: usize, cols: usize| {
        let data = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        DenseMatrix::from_vec(rows, cols, data)
    };
    let features = normal(n, d)?;
    let params = GcnParams {
        w0: normal(d, h)?,
        w1: normal(h, c)?,
    };
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let mut labeled: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
    if labeled.is_empty() {
        labeled.push(0);
    }
    let weight_decay = if rng.random_bool(0.5) { 0.0 } else { 5e-4 };
    Ok(RandomInstance {
        graph,
        features,
        labels,
        labeled,
        params,
        weight_decay,
    })
}

pub fn check_instance(inst: &RandomInstance) -> Result<InstanceCheck> {
    let adj = normalized_adjacency(&inst.graph);
    let c = inst.params.num_classes();
    let weights = class_weights(&inst.labels, &inst.labeled, c);
    let problem = LossProblem {
        adj: &adj,
        features: &inst.features,
        labels: &inst.labels,
        labeled: &inst.labeled,
        class_weights: &weights,
        weight_decay: inst.weight_decay,
    };
    let (_, grads) = gcn_loss_and_grad(&inst.params, &problem, None)?;
    let ax = adj.spmm(&inst.features)?;
    let relu_pattern = |w0: &DenseMatrix| -> Result<Vec<bool>> {
        Ok(ax.matmul(w0)?.as_slice().iter().map(|&v| v > 0.0).collect())
    };
    let base_pattern = relu_pattern(&inst.params.w0)?;

    let mut checked = 0;
    let mut at_kink = 0;
    let mut failures = 0;
    let mut max_rel: f64 = 0.0;
    for layer in 0..2 {
        let len = if layer == 0 {
            inst.params.w0.as_slice().len()
        } else {
            inst.params.w1.as_slice().len()
        };
        for i in 0..len {
            let eval = |delta: f64| -> Result<f64> {
                let mut p = inst.params.clone();
                let m = if layer == 0 { &mut p.w0 } else { &mut p.w1 };
                m.as_mut_slice()[i] += delta;
                Ok(gcn_loss_and_grad(&p, &problem, None)?.0)
            };
            if layer == 0 {
                let mut crosses = false;
                for delta in [-2.0 * FD_STEP, 2.0 * FD_STEP] {
                    let mut w0 = inst.params.w0.clone();
                    w0.as_mut_slice()[i] += delta;
                    crosses |= relu_pattern(&w0)? != base_pattern;
                }
                if crosses {
                    at_kink += 1;
                    continue;
                }
            }
            let h = FD_STEP;
            let numeric =
                (eval(-2.0 * h)? - 8.0 * eval(-h)? + 8.0 * eval(h)? - eval(2.0 * h)?) / (12.0 * h);
            let analytic = if layer == 0 {
                grads.w0.as_slice()[i]
            } else {
                grads.w1.as_slice()[i]
            };
            if analytic.abs().max(numeric.abs()) <= MIN_MAGNITUDE {
                continue;
            }
            checked += 1;
            let rel = relative_error(analytic, numeric);
            max_rel = max_rel.max(rel);
            if rel > REL_TOL {
                failures += 1;
            }
        }
    }
    Ok(InstanceCheck {
        n: inst.graph.num_nodes(),
        d: inst.params.input_dim(),
        hidden: inst.params.hidden(),
        classes: c,
        coordinates_checked: checked,
        coordinates_at_kink: at_kink,
        max_rel_error: max_rel,
        failures,
    })
}

/// Checks `count` random instances derived from `seed`.
pub fn run_gradient_check(count: usize, seed: u64) -> Result<GradCheckReport> {
    let mut instances = Vec::with_capacity(count);
    for k in 0..count {
        let inst = random_instance(crate::seeding::derive_seed(
            seed,
            &["instance", &k.to_string()],
        ))?;
        instances.push(check_instance(&inst)?);
    }
    let max_rel_error = instances
        .iter()
        .map(|i| i.max_rel_error)
        .fold(0.0, f64::max);
    let passed = instances.iter().all(|i| i.failures == 0);
    Ok(GradCheckReport {
        instances,
        max_rel_error,
        passed,
    })
}
