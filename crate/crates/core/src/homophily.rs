//! Label-agreement statistics over graph edges.
//!
//! Every undirected edge `(u, v)` contributes one half-edge to the row of
//! `y_u` and one to the row of `y_v`. The neighbor-distribution matrix
//! normalizes those rows; its diagonal is the per-class homophily.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub(crate) fn check_labels(n: usize, labels: &[usize], num_classes: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::LabelCount {
            expected: n,
            actual: labels.len(),
        });
    }
    if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
        return Err(Error::LabelOutOfRange {
            node,
            label,
            num_classes,
        });
    }
    Ok(())
}

/// Largest label plus one.
pub fn infer_num_classes(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

/// Fraction of undirected edges whose endpoints share a label. `None` for an
/// edgeless graph.
pub fn edge_homophily(g: &Graph, labels: &[usize]) -> Result<Option<f64>> {
    check_labels(g.num_nodes(), labels, usize::MAX)?;
    if g.num_edges() == 0 {
        return Ok(None);
    }
    let same = g.edges().filter(|&(u, v)| labels[u] == labels[v]).count();
    Ok(Some(same as f64 / g.num_edges() as f64))
}

/// Half-edge counts: entry `[c][k]` counts edges between a class-`c` node and
/// a class-`k` node, seen from the class-`c` side.
pub fn half_edge_counts(g: &Graph, labels: &[usize], num_classes: usize) -> Result<Vec<Vec<u64>>> {
    check_labels(g.num_nodes(), labels, num_classes)?;
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (u, v) in g.edges() {
        counts[labels[u]][labels[v]] += 1;
        counts[labels[v]][labels[u]] += 1;
    }
    Ok(counts)
}

/// Row-stochastic class-to-class neighbor composition. Rows of classes with
/// no incident edges are `None`.
pub fn neighbor_distribution(
    g: &Graph,
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Option<Vec<f64>>>> {
    let counts = half_edge_counts(g, labels, num_classes)?;
    Ok(counts
        .into_iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            (total > 0).then(|| row.iter().map(|&c| c as f64 / total as f64).collect())
        })
        .collect())
}

/// Diagonal of [`neighbor_distribution`]; `None` marks a class without
/// incident edges.
pub fn per_class_homophily(
    g: &Graph,
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Option<f64>>> {
    Ok(neighbor_distribution(g, labels, num_classes)?
        .into_iter()
        .enumerate()
        .map(|(c, row)| row.map(|r| r[c]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForeignNeighbor {
    pub class: usize,
    pub fraction: f64,
}

/// Per class, the off-diagonal class with the largest share (lowest id on
/// ties). `None` when the row is undefined, there is no other class, or the
/// class has no foreign neighbors at all.
pub fn top_foreign_neighbor(matrix: &[Option<Vec<f64>>]) -> Vec<Option<ForeignNeighbor>> {
    matrix
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let row = row.as_ref()?;
            let mut best: Option<ForeignNeighbor> = None;
            for (k, &f) in row.iter().enumerate() {
                if k == c {
                    continue;
                }
                if best.is_none_or(|b| f > b.fraction) {
                    best = Some(ForeignNeighbor {
                        class: k,
                        fraction: f,
                    });
                }
            }
            best.filter(|b| b.fraction > 0.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    pub num_nodes: usize,
    /// Undirected edges, each counted once.
    pub num_edges: usize,
    /// Adjacency entries with both orientations stored.
    pub num_directed_entries: usize,
    pub num_classes: usize,
    pub overall: Option<f64>,
    pub per_class: Vec<Option<f64>>,
    pub neighbor_matrix: Vec<Option<Vec<f64>>>,
    pub top_foreign: Vec<Option<ForeignNeighbor>>,
    /// Half-edges incident to each class.
    pub class_half_edges: Vec<u64>,
    pub class_sizes: Vec<usize>,
}

impl HomophilyReport {
    pub fn compute(g: &Graph, labels: &[usize], num_classes: usize) -> Result<Self> {
        let counts = half_edge_counts(g, labels, num_classes)?;
        let neighbor_matrix = neighbor_distribution(g, labels, num_classes)?;
        let per_class = neighbor_matrix
            .iter()
            .enumerate()
            .map(|(c, row)| row.as_ref().map(|r| r[c]))
            .collect();
        let mut class_sizes = vec![0usize; num_classes];
        for &l in labels {
            class_sizes[l] += 1;
        }
        Ok(HomophilyReport {
            num_nodes: g.num_nodes(),
            num_edges: g.num_edges(),
            num_directed_entries: g.num_directed_entries(),
            num_classes,
            overall: edge_homophily(g, labels)?,
            per_class,
            top_foreign: top_foreign_neighbor(&neighbor_matrix),
            neighbor_matrix,
            class_half_edges: counts.iter().map(|r| r.iter().sum()).collect(),
            class_sizes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> Graph {
        Graph::from_edges(&[(0, 1), (1, 2)], 3).unwrap()
    }

    #[test]
    fn triangle_single_label_is_fully_homophilous() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (0, 2)], 3).unwrap();
        assert_eq!(edge_homophily(&g, &[4, 4, 4]).unwrap(), Some(1.0));
    }

    #[test]
    fn path_with_one_foreign_endpoint() {
        let y = [0, 0, 1];
        assert_eq!(edge_homophily(&path(), &y).unwrap(), Some(0.5));
        let m = neighbor_distribution(&path(), &y, 2).unwrap();
        let a = m[0].as_ref().unwrap();
        assert!((a[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((a[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m[1].as_deref(), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn star_single_class() {
        let g = Graph::from_edges(&[(0, 1), (0, 2), (0, 3)], 4).unwrap();
        assert_eq!(
            per_class_homophily(&g, &[0; 4], 1).unwrap(),
            vec![Some(1.0)]
        );
        let m = neighbor_distribution(&g, &[0; 4], 1).unwrap();
        assert_eq!(m, vec![Some(vec![1.0])]);
    }

    #[test]
    fn class_without_edges_is_undefined() {
        let g = Graph::from_edges(&[(0, 1)], 3).unwrap();
        let h = per_class_homophily(&g, &[0, 0, 1], 2).unwrap();
        assert_eq!(h, vec![Some(1.0), None]);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            per_class_homophily(&path(), &[0, 3, 0], 2),
            Err(Error::LabelOutOfRange {
                node: 1,
                label: 3,
                ..
            })
        ));
        assert!(matches!(
            edge_homophily(&path(), &[0, 0]),
            Err(Error::LabelCount {
                expected: 3,
                actual: 2
            })
        ));
    }

    #[test]
    fn top_foreign_ties_and_identity() {
        let m = vec![Some(vec![0.5, 0.25, 0.25]), Some(vec![0.0, 1.0, 0.0]), None];
        let top = top_foreign_neighbor(&m);
        assert_eq!(
            top[0],
            Some(ForeignNeighbor {
                class: 1,
                fraction: 0.25
            })
        );
        assert_eq!(top[1], None);
        assert_eq!(top[2], None);
        assert_eq!(top_foreign_neighbor(&[Some(vec![1.0])]), vec![None]);
    }
}
