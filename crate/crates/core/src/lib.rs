//! Weighted multiplier method estimation of a hidden root population from
//! tree-structured survey data, with JAGS model generation and tree rendering.

pub mod estimate;
pub mod jags;
pub mod render;
pub mod sampling;
pub mod tree;

pub use estimate::{
    analytic_path_moments, back_calculate, build_sample_matrix, confidence_interval,
    min_variance_weights, two_stage_estimate, wmm_estimate, AlternateSources, EstimateConfig,
    EstimateError, EstimateReport, IntervalType, SampleMatrix, WeightVector,
};
pub use tree::{build_tree, parse_edge_table, EdgeRecord, PopTree, TableError, TreeError};
