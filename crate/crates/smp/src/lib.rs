//! Stochastic message passing for graph representation learning.
//!
//! The core idea: propagate a randomly sampled node-signal matrix E through
//! the normalized adjacency alongside the node features, so that nodes get
//! position-aware representations even when features are constant or
//! symmetric. The crate bundles:
//!
//! - sparse/dense linear algebra over f32 or f64 ([`scalar::Scalar`]),
//! - the propagation models (SGC and GCN baselines plus the stochastic
//!   variants) with exact backward passes,
//! - dataset generators and text-format loaders,
//! - a full training pipeline (Adam, step decay, best-validation
//!   checkpointing) for link prediction, node classification and pairwise
//!   node classification,
//! - executable verification of the method's structural claims: chi-
//!   distributed pairwise distances, permutation equivariance, symmetry
//!   breaking on automorphic twins, and the random-projection error bound
//!   for recovering graph proximity.

pub mod bench;
pub mod datasets;
pub mod dense;
pub mod error;
pub mod graph;
pub mod jsonio;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod sparse;
pub mod split;
pub mod stochastic;
pub mod train;
pub mod verify;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use graph::{Graph, NodePermutation};
pub use scalar::Scalar;
pub use sparse::SparseMatrix;

/// Double precision (the default throughout; all verification runs use it).
pub type Dense64 = DenseMatrix<f64>;
pub type Sparse64 = SparseMatrix<f64>;

/// Single precision, selectable for training.
pub type Dense32 = DenseMatrix<f32>;
pub type Sparse32 = SparseMatrix<f32>;
