//! Brute-force oracles shared by the integration tests. Everything here is
//! computed densely from raw edge lists, without the library's CSR code.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unique undirected non-loop edges as `(min, max)` pairs.
pub fn edge_set(edges: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
    edges
        .iter()
        .filter(|(u, v)| u != v)
        .map(|&(u, v)| (u.min(v), u.max(v)))
        .collect()
}

pub fn random_edges(r: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .map(|_| (r.random_range(0..n), r.random_range(0..n)))
        .collect()
}

pub fn dense_adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for (u, v) in edge_set(edges) {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    a
}

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` as a dense matrix.
pub fn dense_normalized(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = dense_adjacency(n, edges);
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    a
}

pub fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub struct HomophilyOracle {
    pub overall: Option<f64>,
    /// `counts[c][k]`: half-edges from class `c` nodes to class `k` nodes.
    pub counts: Vec<Vec<u64>>,
}

impl HomophilyOracle {
    pub fn new(edges: &[(usize, usize)], labels: &[usize], num_classes: usize) -> Self {
        let set = edge_set(edges);
        let mut counts = vec![vec![0u64; num_classes]; num_classes];
        let mut intra = 0usize;
        for &(u, v) in &set {
            counts[labels[u]][labels[v]] += 1;
            counts[labels[v]][labels[u]] += 1;
            if labels[u] == labels[v] {
                intra += 1;
            }
        }
        let overall = if set.is_empty() {
            None
        } else {
            Some(intra as f64 / set.len() as f64)
        };
        HomophilyOracle { overall, counts }
    }

    pub fn row(&self, c: usize) -> Option<Vec<f64>> {
        let total: u64 = self.counts[c].iter().sum();
        if total == 0 {
            return None;
        }
        Some(
            self.counts[c]
                .iter()
                .map(|&k| k as f64 / total as f64)
                .collect(),
        )
    }

    pub fn per_class(&self, c: usize) -> Option<f64> {
        self.row(c).map(|r| r[c])
    }
}

/// Per-class precision, recall and F1 by direct counting.
pub struct ScoreOracle {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
}

impl ScoreOracle {
    pub fn new(pred: &[usize], truth: &[usize], num_classes: usize) -> Self {
        let mut precision = Vec::new();
        let mut recall = Vec::new();
        let mut f1 = Vec::new();
        for c in 0..num_classes {
            let tp = pred
                .iter()
                .zip(truth)
                .filter(|&(&p, &t)| p == c && t == c)
                .count() as f64;
            let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
            let actual = truth.iter().filter(|&&t| t == c).count() as f64;
            let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
            let r = if actual > 0.0 { tp / actual } else { 0.0 };
            precision.push(p);
            recall.push(r);
            f1.push(if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            });
        }
        ScoreOracle {
            precision,
            recall,
            f1,
        }
    }
}

/// Dense reference of the class-weighted GCN objective, with balanced
/// weights `N / (K · count_c)` over the labeled set.
pub struct GcnOracle {
    pub a_hat: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub labeled: Vec<usize>,
    pub weight_decay: f64,
}

impl GcnOracle {
    pub fn pre_activation(&self, w0: &[Vec<f64>]) -> Vec<Vec<f64>> {
        dense_mul(&self.a_hat, &dense_mul(&self.x, w0))
    }

    pub fn loss(&self, w0: &[Vec<f64>], w1: &[Vec<f64>]) -> f64 {
        let h: Vec<Vec<f64>> = self
            .pre_activation(w0)
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        let z = dense_mul(&self.a_hat, &dense_mul(&h, w1));
        let c = w1[0].len();
        let mut counts = vec![0.0; c];
        for &v in &self.labeled {
            counts[self.labels[v]] += 1.0;
        }
        let present = counts.iter().filter(|&&k| k > 0.0).count() as f64;
        let weight = |k: usize| self.labeled.len() as f64 / (present * counts[k]);
        let mut num = 0.0;
        let mut den = 0.0;
        for &v in &self.labeled {
            let row = &z[v];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|q| (q - max).exp()).sum::<f64>().ln();
            let w = weight(self.labels[v]);
            num += w * (lse - row[self.labels[v]]);
            den += w;
        }
        let norm: f64 = w0.iter().chain(w1).flatten().map(|v| v * v).sum();
        num / den + 0.5 * self.weight_decay * norm
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
