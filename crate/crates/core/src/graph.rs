//! Undirected graphs in CSR form and the symmetrically normalized adjacency
//! operator `D̃^{-1/2}(A + I)D̃^{-1/2}` used for propagation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Immutable undirected graph. Neighbor lists are sorted ascending, contain
/// no self-loops and no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    num_edges: usize,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Both orientations,
    /// duplicates and self-loops are accepted; the result is symmetric,
    /// deduplicated and loop-free.
    pub fn from_edges(edges: &[(usize, usize)], n: usize) -> Result<Graph> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "graph must have at least one node".into(),
            });
        }
        let mut degree = vec![0usize; n];
        for (index, &(u, v)) in edges.iter().enumerate() {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { index, id, n });
                }
            }
            if u != v {
                degree[u] += 1;
                degree[v] += 1;
            }
        }

        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut cursor = offsets.clone();
        let mut cols = vec![0usize; offsets[n]];
        for &(u, v) in edges {
            if u == v {
                continue;
            }
            cols[cursor[u]] = v;
            cursor[u] += 1;
            cols[cursor[v]] = u;
            cursor[v] += 1;
        }

        // sort + dedup each row, then compact
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(cols.len());
        for i in 0..n {
            let row = &mut cols[offsets[i]..offsets[i + 1]];
            row.sort_unstable();
            let mut last = None;
            for &c in row.iter() {
                if last != Some(c) {
                    col_indices.push(c);
                    last = Some(c);
                }
            }
            row_offsets.push(col_indices.len());
        }
        let num_edges = col_indices.len() / 2;
        Ok(Graph {
            n,
            row_offsets,
            col_indices,
            num_edges,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Undirected edge count, each edge counted once.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Stored (directed) adjacency entries, `2 * num_edges`.
    pub fn num_directed_entries(&self) -> usize {
        self.col_indices.len()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_offsets[u + 1] - self.row_offsets[u]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|u| self.degree(u)).collect()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        self.edges().collect()
    }

    /// Relabels nodes so that old node `u` becomes `perm[u]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::dims("Graph::permute", self.n, perm.len()));
        }
        let edges: Vec<_> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        Graph::from_edges(&edges, self.n)
    }
}

/// `build_graph` under its operation name.
pub fn build_graph(edges: &[(usize, usize)], n: usize) -> Result<Graph> {
    Graph::from_edges(edges, n)
}

/// Normalized adjacency with self-loops. Shares the graph's topology plus a
/// diagonal entry per row, stored in column order.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdj {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Weight of `(u, v)` is `1/sqrt((deg(u)+1)(deg(v)+1))` for every edge of
/// `A + I`.
pub fn normalized_adjacency(g: &Graph) -> NormAdj {
    let n = g.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|u| 1.0 / ((g.degree(u) + 1) as f64).sqrt())
        .collect();
    let mut row_offsets = Vec::with_capacity(n + 1);
    row_offsets.push(0);
    let mut col_indices = Vec::with_capacity(g.num_directed_entries() + n);
    let mut values = Vec::with_capacity(g.num_directed_entries() + n);
    for u in 0..n {
        let mut diag_done = false;
        for &v in g.neighbors(u) {
            if !diag_done && v > u {
                col_indices.push(u);
                values.push(inv_sqrt[u] * inv_sqrt[u]);
                diag_done = true;
            }
            col_indices.push(v);
            values.push(inv_sqrt[u] * inv_sqrt[v]);
        }
        if !diag_done {
            col_indices.push(u);
            values.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        row_offsets.push(col_indices.len());
    }
    NormAdj {
        n,
        row_offsets,
        col_indices,
        values,
    }
}

const PAR_MIN_ROWS: usize = 512;

impl NormAdj {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn row(&self, u: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[u]..self.row_offsets[u + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    /// Stored weight of `(u, v)`, zero when absent.
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let (cols, vals) = self.row(u);
        cols.binary_search(&v).map_or(0.0, |i| vals[i])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for u in 0..self.n {
            let (cols, vals) = self.row(u);
            for (&v, &w) in cols.iter().zip(vals) {
                m.set(u, v, w);
            }
        }
        m
    }

    /// Sparse-dense product `self * m`. Each output row is accumulated in
    /// column order of the sparse row, so the parallel and sequential paths
    /// give identical bits.
    pub fn spmm(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.rows() != self.n {
            return Err(Error::dims(
                "spmm",
                format!("{} rows", self.n),
                format!("{} rows", m.rows()),
            ));
        }
        let k = m.cols();
        let mut out = DenseMatrix::zeros(self.n, k);
        if k == 0 {
            return Ok(out);
        }
        let fill = |(u, o): (usize, &mut [f64])| {
            let (cols, vals) = self.row(u);
            for (&v, &w) in cols.iter().zip(vals) {
                for (ov, &x) in o.iter_mut().zip(m.row(v)) {
                    *ov += w * x;
                }
            }
        };
        if self.n >= PAR_MIN_ROWS {
            out.as_mut_slice()
                .par_chunks_mut(k)
                .enumerate()
                .for_each(fill);
        } else {
            out.as_mut_slice().chunks_mut(k).enumerate().for_each(fill);
        }
        Ok(out)
    }
}

/// Free-function form of [`NormAdj::spmm`].
pub fn spmm(a: &NormAdj, m: &DenseMatrix) -> Result<DenseMatrix> {
    a.spmm(m)
}
