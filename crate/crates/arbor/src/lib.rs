//! Provably optimal depth-bounded binary classification trees.
//!
//! Correctly classified datapoints are modeled as unit flows from a
//! source through the tree to a sink, which yields mixed-integer
//! formulations with tight relaxations. The crate bundles everything
//! needed to train such trees end to end: data binarization, the flow
//! formulations and an axis-aligned big-M baseline, a bounded-variable
//! simplex, a branch-and-bound engine with lazy-constraint callbacks,
//! and a Benders decomposition whose subproblems are solved by a
//! depth-linear min-cut walk emitting non-dominated cuts.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run -p arbor --example train_basic          # direct flow formulation
//! cargo run -p arbor --example benders_engine       # Benders decomposition engine
//! cargo run -p arbor --example regularized_tree     # tuning tree size via the penalty
//! cargo run -p arbor --example csv_pipeline         # CSV -> binarize -> split -> train
//! cargo run -p arbor --example imbalanced_objectives # balanced / worst-case accuracy
//! cargo run -p arbor --example fairness_constraints # statistical parity side constraints
//! cargo run -p arbor --example relaxation_strength  # LP bound comparison vs the baseline
//! cargo run -p arbor --example benchmark_protocol   # multi-seed benchmark harness
//! ```
//!
//! The `arbor` binary wraps the same capabilities behind `train`,
//! `predict`, `evaluate`, `benchmark` and `relax` subcommands.

pub mod benders;
pub mod branchbound;
pub mod cli;
pub mod constraints;
pub mod dataset;
pub mod flowgraph;
pub mod formulations;
pub mod linopt;
pub mod metrics;
pub mod tree;

pub use dataset::{binarize, load_csv, split, BinaryDataset, RawTable, SplitSpec};
pub use tree::TrainedTree;
