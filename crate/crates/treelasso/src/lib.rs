//! Tree-guided group lasso for sparse multiple-output linear regression.
//!
//! The penalty couples the columns of a J x K coefficient matrix through a
//! tree over the K outputs: every node `v` contributes `w_v * ||beta^j_{G_v}||_2`
//! per input `j`, where `G_v` is the set of outputs under `v` and the weights
//! `w_v` are derived from per-node separate/joint selection weights `(s_v, g_v)`
//! so that every output is penalized with total weight one.
//!
//! The crate provides:
//! - [`tree`]: the output tree, weight derivation and validation,
//! - [`penalty`]: flat and recursive evaluation of the penalty,
//! - [`solver`]: alternating minimization for the squared-penalty objective,
//!   plus cross-validation over a lambda grid,
//! - [`treelearn`]: learning a tree from output correlations (UPGMA),
//! - [`simgen`]: synthetic genotype/expression-style benchmark generation,
//! - [`eval`]: support-recovery ROC/AUC and prediction-error metrics,
//! - [`io`]: delimiter-separated matrix files, tree/dendrogram formats,
//! - [`experiment`]: replicate-level benchmark pipelines behind the CLI.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod penalty;
pub mod simgen;
pub mod solver;
pub mod tree;
pub mod treelearn;

pub use dataset::{center_columns, DataSet};
pub use error::{Error, Result};
pub use tree::{make_l1l2_tree, make_lasso_tree, OutputTree, TreeNode};

/// Coefficient matrix B with one row per input and one column per output.
pub type CoefficientMatrix = ndarray::Array2<f64>;
