//! Semi-supervised node classification diagnostics: a two-layer GCN and
//! feature-only baselines trained under label scarcity and feature ablation,
//! graph homophily analytics, and the homophily × feature-strength quadrant
//! rule for predicting when message passing helps.

pub mod baselines;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod gcn;
pub mod gradcheck;
pub mod graph;
pub mod homophily;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod protocol;
pub mod quadrant;
pub mod seeding;
pub mod synth;
pub mod tuning;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use graph::{build_graph, normalized_adjacency, spmm, Graph, NormAdj};
pub use matrix::DenseMatrix;
