//! Planted-partition graphs with a target edge homophily, and Gaussian
//! class-mean features with a tunable signal strength.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::DenseMatrix;
use crate::seeding::child_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub num_classes: usize,
    pub target_homophily: f64,
    pub avg_degree: f64,
    pub feature_dim: usize,
    /// Norm of each class mean, in units of the unit-variance noise.
    pub signal: f64,
    pub seed: u64,
    /// Relative class sizes; balanced when `None`.
    pub class_proportions: Option<Vec<f64>>,
}

impl SyntheticSpec {
    pub fn new(n: usize, num_classes: usize, target_homophily: f64, avg_degree: f64) -> Self {
        SyntheticSpec {
            n,
            num_classes,
            target_homophily,
            avg_degree,
            feature_dim: 16,
            signal: 0.0,
            seed: 0,
            class_proportions: None,
        }
    }

    pub fn with_features(mut self, feature_dim: usize, signal: f64) -> Self {
        self.feature_dim = feature_dim;
        self.signal = signal;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    fn class_sizes(&self) -> Result<Vec<usize>> {
        let c = self.num_classes;
        let props = match &self.class_proportions {
            Some(p) => {
                if p.len() != c || p.iter().any(|&v| !(v > 0.0)) {
                    return Err(Self::invalid(
                        "class_proportions",
                        "need one positive weight per class",
                    ));
                }
                p.clone()
            }
            None => vec![1.0; c],
        };
        let total: f64 = props.iter().sum();
        // largest-remainder rounding so sizes sum to n
        let exact: Vec<f64> = props.iter().map(|p| p / total * self.n as f64).collect();
        let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut rest = self.n - sizes.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            sizes[i] += 1;
            rest -= 1;
        }
        Ok(sizes)
    }
}

/// Samples the graph and labels. The edge budget is
/// `round(n · avg_degree / 2)`; `round(target · budget)` of those edges join
/// two nodes of the same class, the rest join nodes of different classes.
/// Endpoints are uniform within the allowed set; duplicates are resampled.
pub fn generate_graph(spec: &SyntheticSpec) -> Result<(Graph, Vec<usize>)> {
    let n = spec.n;
    let c = spec.num_classes;
    if n < 2 {
        return Err(SyntheticSpec::invalid("n", "need at least two nodes"));
    }
    if c == 0 || c > n {
        return Err(SyntheticSpec::invalid(
            "num_classes",
            format!("{c} classes for {n} nodes"),
        ));
    }
    if !(spec.target_homophily > 0.0 && spec.target_homophily <= 1.0) {
        return Err(SyntheticSpec::invalid(
            "target_homophily",
            "must lie in (0, 1]",
        ));
    }
    if !(spec.avg_degree > 0.0) {
        return Err(SyntheticSpec::invalid("avg_degree", "must be positive"));
    }
    if spec.target_homophily * n as f64 / (c as f64) < 1.0 {
        return Err(SyntheticSpec::invalid(
            "target_homophily",
            "target·n/C must be at least 1",
        ));
    }
    let sizes = spec.class_sizes()?;

    let mut labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
        .collect();
    let mut rng = child_rng(spec.seed, &["synth", "graph"]);
    labels.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (v, &l) in labels.iter().enumerate() {
        members[l].push(v);
    }

    let budget = (n as f64 * spec.avg_degree / 2.0).round() as usize;
    let (mut intra, mut inter) = if c == 1 {
        (budget, 0)
    } else {
        let k = (spec.target_homophily * budget as f64).round() as usize;
        (k, budget - k)
    };
    let intra_cap: usize = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let total_cap = n * (n - 1) / 2;
    if intra > intra_cap || inter > total_cap - intra_cap {
        return Err(SyntheticSpec::invalid(
            "avg_degree",
            "more edges requested than node pairs available",
        ));
    }

    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(budget * 2);
    let mut edges = Vec::with_capacity(budget);
    let max_attempts = budget.saturating_mul(200).max(10_000);
    let mut attempts = 0usize;
    while intra + inter > 0 {
        attempts += 1;
        if attempts > max_attempts {
            return Err(SyntheticSpec::invalid(
                "avg_degree",
                "edge sampling did not converge; graph too dense",
            ));
        }
        let want_intra = intra > 0 && (inter == 0 || rng.random_range(0..intra + inter) < intra);
        let u = rng.random_range(0..n);
        let cu = labels[u];
        let v = if want_intra {
            let pool = &members[cu];
            if pool.len() < 2 {
                continue;
            }
            pool[rng.random_range(0..pool.len())]
        } else {
            let others = n - members[cu].len();
            if others == 0 {
                continue;
            }
            // uniform over nodes outside class cu
            let mut j = rng.random_range(0..others);
            let mut k = 0;
            loop {
                if k != cu {
                    if j < members[k].len() {
                        break members[k][j];
                    }
                    j -= members[k].len();
                }
                k += 1;
            }
        };
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if !seen.insert(key) {
            continue;
        }
        edges.push(key);
        if want_intra {
            intra -= 1;
        } else {
            inter -= 1;
        }
    }
    Ok((Graph::from_edges(&edges, n)?, labels))
}

/// `x_v = μ_{y_v} + ε_v` with `ε_v ~ N(0, I)` and each class mean drawn once,
/// uniformly on the sphere of radius `signal`.
pub fn generate_features(
    labels: &[usize],
    d: usize,
    signal: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    if d == 0 {
        return Err(SyntheticSpec::invalid("feature_dim", "must be at least 1"));
    }
    if !(signal >= 0.0) {
        return Err(SyntheticSpec::invalid("signal", "must be non-negative"));
    }
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let mut mean_rng = child_rng(seed, &["synth", "means"]);
    let means: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            let g: Vec<f64> = (0..d).map(|_| mean_rng.sample(StandardNormal)).collect();
            let norm = g
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            g.into_iter().map(|v| signal * v / norm).collect()
        })
        .collect();
    let mut noise = child_rng(seed, &["synth", "noise"]);
    let mut data = Vec::with_capacity(labels.len() * d);
    for &l in labels {
        for mu in &means[l] {
            data.push(mu + noise.sample::<f64, _>(StandardNormal));
        }
    }
    DenseMatrix::from_vec(labels.len(), d, data)
}

/// Graph, labels and features from one spec.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    let (graph, labels) = generate_graph(spec)?;
    let features = generate_features(&labels, spec.feature_dim, spec.signal, spec.seed)?;
    let name = format!(
        "synthetic-n{}-c{}-h{}-deg{}-d{}-s{}-seed{}",
        spec.n,
        spec.num_classes,
        spec.target_homophily,
        spec.avg_degree,
        spec.feature_dim,
        spec.signal,
        spec.seed
    );
    Dataset::new(name, graph, features, labels, spec.num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homophily::edge_homophily;

    #[test]
    fn perfect_homophily_is_exact() {
        let spec = SyntheticSpec::new(300, 3, 1.0, 6.0);
        let (g, y) = generate_graph(&spec).unwrap();
        assert_eq!(edge_homophily(&g, &y).unwrap(), Some(1.0));
        assert_eq!(g.num_edges(), 900);
    }

    #[test]
    fn one_class_is_fully_homophilous() {
        let spec = SyntheticSpec::new(100, 1, 0.3, 4.0);
        let (g, y) = generate_graph(&spec).unwrap();
        assert_eq!(edge_homophily(&g, &y).unwrap(), Some(1.0));
    }

    #[test]
    fn balanced_and_imbalanced_sizes() {
        let (_, y) = generate_graph(&SyntheticSpec::new(103, 4, 0.8, 4.0)).unwrap();
        let mut counts = [0; 4];
        y.iter().for_each(|&l| counts[l] += 1);
        assert_eq!(counts.iter().sum::<usize>(), 103);
        assert!(counts.iter().all(|&k| k == 25 || k == 26));

        let mut spec = SyntheticSpec::new(100, 2, 0.8, 4.0);
        spec.class_proportions = Some(vec![3.0, 1.0]);
        let (_, y) = generate_graph(&spec).unwrap();
        assert_eq!(y.iter().filter(|&&l| l == 0).count(), 75);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        assert!(generate_graph(&SyntheticSpec::new(10, 20, 0.5, 2.0)).is_err());
        assert!(generate_graph(&SyntheticSpec::new(10, 2, 0.0, 2.0)).is_err());
        assert!(generate_graph(&SyntheticSpec::new(10, 2, 0.5, 50.0)).is_err());
        assert!(generate_graph(&SyntheticSpec::new(10, 5, 0.4, 2.0)).is_err());
    }

    #[test]
    fn zero_signal_is_standard_normal() {
        let y = vec![0, 1, 2, 0, 1, 2];
        let x = generate_features(&y, 2000, 0.0, 4).unwrap();
        let n = x.as_slice().len() as f64;
        let mean = x.as_slice().iter().sum::<f64>() / n;
        let var = x
            .as_slice()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 0.03);
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec::new(200, 4, 0.7, 5.0)
            .with_features(8, 2.0)
            .with_seed(11);
        assert_eq!(
            generate_dataset(&spec).unwrap(),
            generate_dataset(&spec).unwrap()
        );
    }
}
