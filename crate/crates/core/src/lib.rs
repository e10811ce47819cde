//! Graph-guided data augmentation for tabular regression.
//!
//! A causal graph over the columns (directed edges for direct effects,
//! bidirected edges for hidden confounding) tells which columns each column's
//! conditional distribution depends on. The augmenter recombines observed
//! values column by column, weighting each recombination with kernel
//! estimates of those conditionals, and the weighted rows are fed to a
//! gradient boosted tree learner alongside the original data.

pub mod admg;
pub mod augment;
pub mod cli;
pub mod data;
pub mod gbrt;
pub mod kernels;
pub mod risk;
pub mod synth;

pub use admg::{Admg, AdmgError, GraphFile, MarkovPillowTable, ParseError, TopoIndexing};
pub use augment::{
    brute_force_weights, fill_prob_tree, AugmentConfig, AugmentError, AugmentedDataset, Theta,
};
pub use data::{ColumnKind, DataError, Dataset};
pub use gbrt::{fit, grid_search_cv, GbrtConfig, GbrtError, GbrtModel};
pub use kernels::{bandwidth_plan, silverman_bandwidth, BandwidthPlan, ColumnKernel, DegeneratePolicy, KernelKind};
pub use risk::{augmented_risk, combine_training_set, combined_objective, empirical_risk, Predictor, WeightedLossSample};
