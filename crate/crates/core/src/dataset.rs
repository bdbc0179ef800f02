use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::homophily::check_labels;
use crate::matrix::DenseMatrix;

/// A graph with node features and one label per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Dataset> {
        let n = graph.num_nodes();
        if features.rows() != n {
            return Err(Error::dims(
                "Dataset::new",
                format!("{n} feature rows"),
                features.rows(),
            ));
        }
        check_labels(n, &labels, num_classes)?;
        Ok(Dataset {
            name: name.into(),
            graph,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// SHA-256 over the edge set, labels and the features rounded to `f32`,
    /// the precision they are stored at on disk.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_nodes() as u64).to_le_bytes());
        h.update((self.feature_dim() as u64).to_le_bytes());
        h.update((self.num_classes as u64).to_le_bytes());
        for (u, v) in self.graph.edges() {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        for &x in self.features.as_slice() {
            h.update((x as f32).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
