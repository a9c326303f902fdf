use nalgebra::DMatrix;
use rayon::prelude::*;

use super::EstimateError;
use crate::sampling::{plan_tree, realization_rng, sample_realization, DEFAULT_MAX_ATTEMPTS};
use crate::tree::{NodeId, PopTree};

/// Back-calculated root estimate `count / prod(probabilities)`.
pub fn back_calculate(count: u64, probabilities: &[f64]) -> Result<f64, EstimateError> {
    if probabilities.is_empty() {
        return Err(EstimateError::EmptyPath);
    }
    if count == 0 {
        return Err(EstimateError::ZeroCount);
    }
    let mut product = 1.0;
    for &p in probabilities {
        if !(p > 0.0 && p <= 1.0) {
            return Err(EstimateError::InvalidProbability { value: p });
        }
        product *= p;
    }
    Ok(count as f64 / product)
}

/// `M x K` matrix of back-calculated root estimates, one column per
/// informative leaf, one row per joint realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    leaves: Vec<String>,
    values: DMatrix<f64>,
    log_values: DMatrix<f64>,
    /// Relative importance weights, scaled so the largest is 1.
    row_weights: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(
        leaves: Vec<String>,
        values: DMatrix<f64>,
        row_weights: Vec<f64>,
    ) -> Result<Self, EstimateError> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(EstimateError::InvalidMatrix(format!(
                "entry {v} is not a finite positive value"
            )));
        }
        let log_values = values.map(f64::ln);
        Self::assemble(leaves, values, log_values, row_weights)
    }

    /// Builds a matrix from log-scale entries directly.
    pub fn from_log_values(
        leaves: Vec<String>,
        log_values: DMatrix<f64>,
        row_weights: Vec<f64>,
    ) -> Result<Self, EstimateError> {
        if let Some(v) = log_values.iter().find(|v| !v.is_finite()) {
            return Err(EstimateError::InvalidMatrix(format!("log entry {v} is not finite")));
        }
        let values = log_values.map(f64::exp);
        Self::assemble(leaves, values, log_values, row_weights)
    }

    fn assemble(
        leaves: Vec<String>,
        values: DMatrix<f64>,
        log_values: DMatrix<f64>,
        row_weights: Vec<f64>,
    ) -> Result<Self, EstimateError> {
        if leaves.len() != values.ncols() || row_weights.len() != values.nrows() {
            return Err(EstimateError::InvalidMatrix(format!(
                "{}x{} matrix with {} leaves and {} row weights",
                values.nrows(),
                values.ncols(),
                leaves.len(),
                row_weights.len()
            )));
        }
        if row_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(EstimateError::InvalidMatrix("row weights must be finite and nonnegative".into()));
        }
        let max = row_weights.iter().copied().fold(0.0, f64::max);
        if max.is_nan() || max <= 0.0 {
            return Err(EstimateError::VanishingWeights);
        }
        let row_weights = if max == 1.0 {
            row_weights
        } else {
            row_weights.into_iter().map(|w| w / max).collect()
        };
        Ok(SampleMatrix {
            leaves,
            values,
            log_values,
            row_weights,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn log_values(&self) -> &DMatrix<f64> {
        &self.log_values
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.row_weights
    }

    pub fn has_unit_weights(&self) -> bool {
        self.row_weights.iter().all(|&w| w == 1.0)
    }
}

/// Sample matrix plus the branch probabilities it was built from.
#[derive(Debug, Clone)]
pub struct Samples {
    pub matrix: SampleMatrix,
    /// Sampled edges (by entered node, breadth-first) with one value per row.
    pub edges: Vec<(NodeId, Vec<f64>)>,
}

/// Leaf estimates, sampled edge proportions and log importance weight of one realization.
type SampleRow = (Vec<f64>, Vec<f64>, f64);

/// Draws `samples` joint realizations and back-calculates every informative leaf.
/// Realization `m` uses the stream `realization_rng(seed, m)`, so the result
/// does not depend on how rows are scheduled across threads.
pub fn draw_samples(
    tree: &PopTree,
    samples: usize,
    seed: u64,
    max_attempts: u64,
) -> Result<Samples, EstimateError> {
    let informative = tree.informative_leaves();
    if informative.is_empty() {
        return Err(EstimateError::NoInformativePaths);
    }
    if samples < 2 {
        return Err(EstimateError::TooFewSamples { samples });
    }
    let columns: Vec<(u64, Vec<NodeId>)> = informative
        .iter()
        .map(|&leaf| {
            let mut path = Vec::new();
            let mut node = leaf;
            while let Some(parent) = tree.parent(node) {
                path.push(node);
                node = parent;
            }
            (tree.count(leaf).expect("informative leaves have counts"), path)
        })
        .collect();
    let plans = plan_tree(tree);
    let sampled: Vec<NodeId> = plans
        .iter()
        .flat_map(|g| {
            let children = tree.children(g.parent);
            g.plan
                .sampled_members()
                .into_iter()
                .map(move |m| children[m])
        })
        .collect();

    let rows: Vec<Result<SampleRow, EstimateError>> = (0..samples)
        .into_par_iter()
        .map(|m| {
            let mut rng = realization_rng(seed, m as u64);
            let realization = sample_realization(tree, &plans, &mut rng, max_attempts)?;
            let mut probs = Vec::new();
            let estimates = columns
                .iter()
                .map(|(count, path)| {
                    probs.clear();
                    probs.extend(path.iter().map(|&n| {
                        realization
                            .probability(n)
                            .expect("informative path edges are sampled")
                    }));
                    back_calculate(*count, &probs).map_err(|e| e.at_leaf(tree.label(path[0])))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let edge_values = sampled
                .iter()
                .map(|&n| realization.probability(n).expect("planned edge"))
                .collect();
            Ok((estimates, edge_values, realization.log_weight))
        })
        .collect();

    let k = columns.len();
    let mut values = DMatrix::zeros(samples, k);
    let mut edges: Vec<(NodeId, Vec<f64>)> = sampled
        .iter()
        .map(|&n| (n, Vec::with_capacity(samples)))
        .collect();
    let mut log_weights = Vec::with_capacity(samples);
    for (m, row) in rows.into_iter().enumerate() {
        let (estimates, edge_values, log_weight) = row?;
        for (j, v) in estimates.into_iter().enumerate() {
            values[(m, j)] = v;
        }
        for ((_, column), v) in edges.iter_mut().zip(edge_values) {
            column.push(v);
        }
        log_weights.push(log_weight);
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let row_weights = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let leaves = informative.iter().map(|&n| tree.label(n).to_owned()).collect();
    Ok(Samples {
        matrix: SampleMatrix::new(leaves, values, row_weights)?,
        edges,
    })
}

pub fn build_sample_matrix(
    tree: &PopTree,
    samples: usize,
    seed: u64,
) -> Result<SampleMatrix, EstimateError> {
    draw_samples(tree, samples, seed, DEFAULT_MAX_ATTEMPTS).map(|s| s.matrix)
}
