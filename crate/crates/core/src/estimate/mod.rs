//! Root estimation by weighted combination of back-calculated leaf paths.
//!
//! Each informative leaf `L` yields, per joint realization of the branch
//! probabilities, an estimate `D_L / prod(p)` of the root. The estimates are
//! combined on the log scale with weights that minimize the variance of the
//! combination, and the root estimate is the exponential of the (row-weighted)
//! average of the combined log estimates.

mod interval;
mod matrix;
mod moments;
mod two_stage;
mod weights;

use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::{SamplingError, DEFAULT_MAX_ATTEMPTS};
use crate::tree::PopTree;

pub use interval::{confidence_interval, weighted_quantile, IntervalInputs, IntervalType};
pub use matrix::{back_calculate, build_sample_matrix, draw_samples, SampleMatrix, Samples};
pub use moments::{analytic_path_moments, dirichlet_path_betas, AnalyticMoments};
pub use two_stage::{
    parse_alternate_sources, two_stage_estimate, AlternateSources, DEFAULT_COMBINATION_CAP,
};
pub use weights::{min_variance_weights, pseudo_inverse, weighted_covariance, WeightVector};

use interval::{interval_with_anchor, Anchor};
use weights::{combine, weighted_mean};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("no informative paths: no leaf with a known count is reached through informed edges only")]
    NoInformativePaths,
    #[error("need at least 2 samples, got {samples}")]
    TooFewSamples { samples: usize },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("branch probability {value} is outside (0, 1]")]
    InvalidProbability { value: f64 },
    #[error("leaf count must be positive")]
    ZeroCount,
    #[error("leaf {leaf} has no known count")]
    MissingCount { leaf: String },
    #[error("empty probability path")]
    EmptyPath,
    #[error("invalid sample matrix: {0}")]
    InvalidMatrix(String),
    #[error("all row weights vanish")]
    VanishingWeights,
    #[error("alpha must lie strictly between 0 and 1, got {alpha}")]
    InvalidAlpha { alpha: f64 },
    #[error("{count} source combinations exceed the cap of {cap}; prune alternate sources")]
    TooManyCombinations { count: u128, cap: usize },
    #[error("alternate source for unknown edge {from}->{to}")]
    UnknownEdge { from: String, to: String },
    #[error("alternate source for edge {from}->{to}: {reason}")]
    InvalidSource { from: String, to: String, reason: String },
    #[error("path to leaf {leaf}: {source}")]
    Path {
        leaf: String,
        #[source]
        source: Box<EstimateError>,
    },
}

impl EstimateError {
    /// Attaches the leaf whose path produced the error.
    pub fn at_leaf(self, leaf: &str) -> Self {
        EstimateError::Path {
            leaf: leaf.to_owned(),
            source: Box::new(self),
        }
    }

    /// Innermost error with path context stripped.
    pub fn root_cause(&self) -> &EstimateError {
        match self {
            EstimateError::Path { source, .. } => source.root_cause(),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    pub samples: usize,
    pub seed: u64,
    pub interval: IntervalType,
    pub alpha: f64,
    pub max_attempts: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            samples: 10_000,
            seed: 0,
            interval: IntervalType::Percentile,
            alpha: 0.05,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

impl EstimateConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        EstimateConfig {
            samples,
            seed,
            ..Default::default()
        }
    }

    pub fn interval(mut self, interval: IntervalType) -> Self {
        self.interval = interval;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.samples < 2 {
            return Err(EstimateError::TooFewSamples {
                samples: self.samples,
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EstimateError::InvalidAlpha { alpha: self.alpha });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSummary {
    pub count: u64,
    /// Row-weighted mean of the path's back-calculated root estimates.
    pub mean_estimate: f64,
    /// Percentile interval of the path's estimates.
    pub interval: [f64; 2],
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub from: String,
    pub to: String,
    /// Row-weighted mean of the sampled branch probability.
    pub mean: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationSummary {
    /// Source index chosen for every edge with alternates (0 is the first listed source).
    pub sources: IndexMap<String, usize>,
    pub root_estimate: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTwoSummary {
    pub combinations: Vec<CombinationSummary>,
    pub weight_fallback: bool,
}

/// Result of an estimation run. Serializes to the JSON report written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub root: String,
    pub root_estimate: f64,
    pub rounded_estimate: u64,
    pub uncertainty: [f64; 2],
    pub interval_type: IntervalType,
    pub alpha: f64,
    pub weights: IndexMap<String, f64>,
    /// Set when the weight precision sum vanished and uniform weights were used.
    pub weight_fallback: bool,
    /// Row-combined log estimates, one per realization.
    pub log_estimates: Vec<f64>,
    /// Realization weights scaled so the largest is 1 (all 1 without importance sampling).
    pub row_weights: Vec<f64>,
    pub per_leaf: IndexMap<String, LeafSummary>,
    pub per_edge: IndexMap<String, EdgeSummary>,
    pub seed: u64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_two: Option<StageTwoSummary>,
}

impl EstimateReport {
    pub fn weight_vector(&self) -> WeightVector {
        WeightVector {
            leaves: self.weights.keys().cloned().collect(),
            weights: self.weights.values().copied().collect(),
            fallback: self.weight_fallback,
        }
    }

    /// Writes the raw samples as CSV: one row per realization, leaf estimates,
    /// then sampled edge probabilities, then the row weight.
    pub fn write_samples_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.per_leaf.keys().cloned().collect();
        header.extend(self.per_edge.keys().cloned());
        header.push("row_weight".to_owned());
        writer.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for m in 0..self.row_weights.len() {
            row.clear();
            row.extend(self.per_leaf.values().map(|l| l.samples[m].to_string()));
            row.extend(self.per_edge.values().map(|e| e.samples[m].to_string()));
            row.push(self.row_weights[m].to_string());
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Root estimate computed from a sample matrix alone.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimate {
    pub weights: WeightVector,
    pub log_estimates: Vec<f64>,
    /// Row-weighted mean of `log_estimates`.
    pub log_root: f64,
    pub root_estimate: f64,
    pub interval: (f64, f64),
    pub precision_sum: f64,
}

/// Combines the columns of `matrix` and summarizes the combination.
pub fn estimate_from_matrix(
    matrix: &SampleMatrix,
    kind: IntervalType,
    alpha: f64,
) -> Result<MatrixEstimate, EstimateError> {
    if matrix.rows() < 2 {
        return Err(EstimateError::TooFewSamples {
            samples: matrix.rows(),
        });
    }
    let c = combine(matrix.log_values(), matrix.row_weights());
    let log_estimates = combined_rows(matrix.log_values(), &c.weights);
    let anchor = Anchor {
        log: log_estimates[0],
        value: (0..matrix.cols())
            .map(|j| matrix.values()[(0, j)].powf(c.weights[j]))
            .product(),
    };
    let log_root = weighted_mean(&log_estimates, matrix.row_weights());
    let inputs = IntervalInputs {
        log_estimates: &log_estimates,
        row_weights: matrix.row_weights(),
        precision_sum: c.precision_sum,
    };
    let interval = interval_with_anchor(&inputs, kind, alpha, anchor)?;
    Ok(MatrixEstimate {
        weights: WeightVector {
            leaves: matrix.leaves().to_vec(),
            weights: c.weights,
            fallback: c.fallback,
        },
        root_estimate: anchor.exp(log_root),
        log_root,
        log_estimates,
        interval,
        precision_sum: c.precision_sum,
    })
}

fn combined_rows(log_values: &nalgebra::DMatrix<f64>, weights: &[f64]) -> Vec<f64> {
    (0..log_values.nrows())
        .map(|m| {
            weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * log_values[(m, j)])
                .sum()
        })
        .collect()
}

/// Samples the tree, combines the informative paths and reports the root estimate.
pub fn wmm_estimate(tree: &PopTree, config: &EstimateConfig) -> Result<EstimateReport, EstimateError> {
    config.validate()?;
    let samples = draw_samples(tree, config.samples, config.seed, config.max_attempts)?;
    report_from_samples(tree, &samples, config)
}

pub(crate) fn report_from_samples(
    tree: &PopTree,
    samples: &Samples,
    config: &EstimateConfig,
) -> Result<EstimateReport, EstimateError> {
    let matrix = &samples.matrix;
    let est = estimate_from_matrix(matrix, config.interval, config.alpha)?;
    let rw = matrix.row_weights();

    let mut per_leaf = IndexMap::new();
    for (j, leaf) in matrix.leaves().iter().enumerate() {
        let column: Vec<f64> = matrix.values().column(j).iter().copied().collect();
        let lo = weighted_quantile(&column, rw, config.alpha / 2.0);
        let hi = weighted_quantile(&column, rw, 1.0 - config.alpha / 2.0);
        let node = tree.node(leaf).expect("matrix leaves come from the tree");
        per_leaf.insert(
            leaf.clone(),
            LeafSummary {
                count: tree.count(node).expect("informative leaves have counts"),
                mean_estimate: weighted_mean(&column, rw),
                interval: [lo, hi],
                samples: column,
            },
        );
    }

    let per_edge = samples
        .edges
        .iter()
        .map(|(node, values)| {
            let edge = tree.edge_into(*node).expect("sampled edges enter non-root nodes");
            let summary = EdgeSummary {
                mean: weighted_mean(values, rw),
                samples: values.clone(),
                from: edge.from.clone(),
                to: edge.to.clone(),
            };
            (edge.to_string(), summary)
        })
        .collect();

    Ok(EstimateReport {
        root: tree.root_label().to_owned(),
        root_estimate: est.root_estimate,
        rounded_estimate: est.root_estimate.round() as u64,
        uncertainty: [est.interval.0, est.interval.1],
        interval_type: config.interval,
        alpha: config.alpha,
        weights: est
            .weights
            .leaves
            .iter()
            .cloned()
            .zip(est.weights.weights.iter().copied())
            .collect(),
        weight_fallback: est.weights.fallback,
        log_estimates: est.log_estimates,
        row_weights: rw.to_vec(),
        per_leaf,
        per_edge,
        seed: config.seed,
        samples: config.samples,
        stage_two: None,
    })
}
