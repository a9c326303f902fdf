use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SampleMatrix;

/// Weights over informative leaves, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub leaves: Vec<String>,
    pub weights: Vec<f64>,
    /// Uniform weights were substituted because `1' P 1` vanished.
    pub fallback: bool,
}

impl WeightVector {
    pub fn get(&self, leaf: &str) -> Option<f64> {
        self.leaves
            .iter()
            .position(|l| l == leaf)
            .map(|i| self.weights[i])
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Minimum-variance combination of the columns of a log-scale matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Combination {
    pub weights: Vec<f64>,
    pub fallback: bool,
    /// `1' P 1` with `P` the pseudo-inverse of the column covariance; the
    /// variance of the combined column is its reciprocal.
    pub precision_sum: f64,
}

/// Weighted mean of `xs`, anchored at the first element so constant input
/// returns that constant exactly.
pub(crate) fn weighted_mean(xs: &[f64], weights: &[f64]) -> f64 {
    let anchor = xs[0];
    let total: f64 = weights.iter().sum();
    let shift: f64 = xs
        .iter()
        .zip(weights)
        .map(|(x, w)| (x - anchor) * w)
        .sum::<f64>()
        / total;
    anchor + shift
}

/// Sample covariance of the columns of `x`. Unit row weights use the `M - 1`
/// denominator; otherwise the weights are normalized and the denominator is
/// `1 - sum(w^2)`, which reduces to the same thing for equal weights.
pub fn weighted_covariance(x: &DMatrix<f64>, row_weights: &[f64]) -> DMatrix<f64> {
    let (m, k) = x.shape();
    let unit = row_weights.iter().all(|&w| w == 1.0);
    let total: f64 = row_weights.iter().sum();
    let norm: Vec<f64> = row_weights.iter().map(|w| w / total).collect();
    let means: Vec<f64> = (0..k)
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            weighted_mean(&col, row_weights)
        })
        .collect();
    let denominator = if unit {
        (m - 1) as f64
    } else {
        1.0 - norm.iter().map(|w| w * w).sum::<f64>()
    };
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let mut s = 0.0;
            for i in 0..m {
                let term = (x[(i, a)] - means[a]) * (x[(i, b)] - means[b]);
                s += if unit { term } else { norm[i] * term };
            }
            let v = if denominator > 0.0 { s / denominator } else { 0.0 };
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    cov
}

/// Moore-Penrose pseudo-inverse via SVD; singular values below
/// `sqrt(eps) * max singular value` are treated as zero.
pub fn pseudo_inverse(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = matrix.shape();
    let svd = matrix.clone().svd(true, true);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = max * f64::EPSILON.sqrt();
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut out = DMatrix::zeros(c, r);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if max > 0.0 && s > tol {
            out += (v_t.row(i).transpose() * u.column(i).transpose()) / s;
        }
    }
    out
}

pub(crate) fn combine(log_values: &DMatrix<f64>, row_weights: &[f64]) -> Combination {
    let k = log_values.ncols();
    let cov = weighted_covariance(log_values, row_weights);
    let precision = pseudo_inverse(&cov);
    let row_sums: Vec<f64> = (0..k).map(|i| precision.row(i).sum()).collect();
    let precision_sum: f64 = row_sums.iter().sum();
    let scale: f64 = precision.iter().map(|v| v.abs()).sum();
    if k == 1 {
        return Combination {
            weights: vec![1.0],
            fallback: false,
            precision_sum,
        };
    }
    if precision_sum.is_nan() || precision_sum <= 1e-12 * scale {
        return Combination {
            weights: vec![1.0 / k as f64; k],
            fallback: true,
            precision_sum: 0.0,
        };
    }
    Combination {
        weights: row_sums.iter().map(|r| r / precision_sum).collect(),
        fallback: false,
        precision_sum,
    }
}

/// Variance-minimizing weights `P 1 / (1' P 1)` from the (row-weighted)
/// covariance of the log-scale columns, `P` its pseudo-inverse.
pub fn min_variance_weights(matrix: &SampleMatrix) -> WeightVector {
    let c = combine(matrix.log_values(), matrix.row_weights());
    WeightVector {
        leaves: matrix.leaves().to_vec(),
        weights: c.weights,
        fallback: c.fallback,
    }
}
