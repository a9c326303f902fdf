use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::weights::weighted_mean;
use super::EstimateError;

/// Half-width multiplier of the precision-based interval on the log scale.
const VAR_MULTIPLIER: f64 = 2.0;
/// Normal quantile used by the Cox interval.
const COX_Z: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalType {
    /// Weighted empirical quantiles of the row-combined estimates.
    #[default]
    Percentile,
    /// `exp(theta +/- 2 sqrt(V))` with `V = 1 / (1' P 1)`.
    Var,
    /// Cox interval for the mean of a log-normal.
    Cox,
}

impl fmt::Display for IntervalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntervalType::Percentile => "percentile",
            IntervalType::Var => "var",
            IntervalType::Cox => "cox",
        })
    }
}

impl FromStr for IntervalType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "percentile" => Ok(IntervalType::Percentile),
            "var" => Ok(IntervalType::Var),
            "cox" => Ok(IntervalType::Cox),
            other => Err(format!("unknown interval type {other:?} (percentile, var, cox)")),
        }
    }
}

/// Linear interpolation between order statistics. Sorted point `i` sits at
/// `(c_i - c_0) / (c_last - c_0)` where `c_i` is the normalized weight below
/// it plus half its own; with equal weights this is `i / (n - 1)`, R's type 7.
pub fn weighted_quantile(values: &[f64], weights: &[f64], level: f64) -> f64 {
    let n = values.len();
    assert!(n > 0 && weights.len() == n);
    let level = level.clamp(0.0, 1.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    if n == 1 {
        return sorted[0];
    }

    if weights.iter().all(|&w| w == weights[0]) {
        let h = (n - 1) as f64 * level;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        return sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]);
    }

    let total: f64 = weights.iter().sum();
    let mut centres = Vec::with_capacity(n);
    let mut below = 0.0;
    for &i in &order {
        let w = weights[i] / total;
        centres.push(below + w / 2.0);
        below += w;
    }
    let (first, last) = (centres[0], centres[n - 1]);
    if last.is_nan() || first.is_nan() || last <= first {
        return sorted[n - 1];
    }
    let positions: Vec<f64> = centres.iter().map(|c| (c - first) / (last - first)).collect();
    let upper = positions.partition_point(|&s| s < level).min(n - 1);
    if upper == 0 {
        return sorted[0];
    }
    let (s0, s1) = (positions[upper - 1], positions[upper]);
    if s1 <= s0 {
        return sorted[upper];
    }
    let t = ((level - s0) / (s1 - s0)).clamp(0.0, 1.0);
    sorted[upper - 1] + t * (sorted[upper] - sorted[upper - 1])
}

/// Row-combined log estimates `theta_m = (L w)_m` and what the intervals need.
#[derive(Debug, Clone, Copy)]
pub struct IntervalInputs<'a> {
    pub log_estimates: &'a [f64],
    pub row_weights: &'a [f64],
    /// `1' P 1`, `P` the precision matrix of the log-scale columns.
    pub precision_sum: f64,
}

/// Reference point for moving between log and population scale: a log value
/// and its exponential, so that `anchor_value * exp(x - anchor_log)` is exact
/// at `x == anchor_log`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Anchor {
    pub log: f64,
    pub value: f64,
}

impl Anchor {
    pub fn of(log: f64) -> Self {
        Anchor {
            log,
            value: log.exp(),
        }
    }

    pub fn exp(&self, x: f64) -> f64 {
        self.value * (x - self.log).exp()
    }
}

fn check(inputs: &IntervalInputs<'_>, alpha: f64) -> Result<(), EstimateError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EstimateError::InvalidAlpha { alpha });
    }
    if inputs.log_estimates.is_empty() || inputs.log_estimates.len() != inputs.row_weights.len() {
        return Err(EstimateError::InvalidMatrix(
            "log estimates and row weights must be nonempty and of equal length".into(),
        ));
    }
    Ok(())
}

pub(crate) fn interval_with_anchor(
    inputs: &IntervalInputs<'_>,
    kind: IntervalType,
    alpha: f64,
    anchor: Anchor,
) -> Result<(f64, f64), EstimateError> {
    check(inputs, alpha)?;
    let theta = inputs.log_estimates;
    let weights = inputs.row_weights;
    let n = theta.len();
    match kind {
        IntervalType::Percentile => {
            let scaled: Vec<f64> = theta.iter().map(|&t| anchor.exp(t)).collect();
            Ok((
                weighted_quantile(&scaled, weights, alpha / 2.0),
                weighted_quantile(&scaled, weights, 1.0 - alpha / 2.0),
            ))
        }
        IntervalType::Var => {
            if n < 2 {
                return Err(EstimateError::TooFewSamples { samples: n });
            }
            let centre = weighted_mean(theta, weights);
            let v = if inputs.precision_sum > 0.0 {
                1.0 / inputs.precision_sum
            } else {
                0.0
            };
            let half = VAR_MULTIPLIER * v.sqrt();
            Ok((anchor.exp(centre - half), anchor.exp(centre + half)))
        }
        IntervalType::Cox => {
            if n < 2 {
                return Err(EstimateError::TooFewSamples { samples: n });
            }
            let mean = weighted_mean(theta, weights);
            let s2 = weighted_variance(theta, weights, mean);
            let nf = n as f64;
            let half = COX_Z * (s2 / nf + s2 * s2 / (2.0 * (nf - 1.0))).sqrt();
            let centre = mean + s2 / 2.0;
            Ok((anchor.exp(centre - half), anchor.exp(centre + half)))
        }
    }
}

fn weighted_variance(xs: &[f64], weights: &[f64], mean: f64) -> f64 {
    if weights.iter().all(|&w| w == weights[0]) {
        return xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    }
    let total: f64 = weights.iter().sum();
    let mut s = 0.0;
    let mut sq = 0.0;
    for (x, w) in xs.iter().zip(weights) {
        let w = w / total;
        s += w * (x - mean).powi(2);
        sq += w * w;
    }
    if sq < 1.0 {
        s / (1.0 - sq)
    } else {
        0.0
    }
}

/// Interval on the population scale. Percentile uses levels `alpha/2` and
/// `1 - alpha/2`; var and cox use their fixed multipliers (2 and 1.96).
pub fn confidence_interval(
    inputs: &IntervalInputs<'_>,
    kind: IntervalType,
    alpha: f64,
) -> Result<(f64, f64), EstimateError> {
    check(inputs, alpha)?;
    interval_with_anchor(inputs, kind, alpha, Anchor::of(inputs.log_estimates[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs<'a>(theta: &'a [f64], w: &'a [f64], precision_sum: f64) -> IntervalInputs<'a> {
        IntervalInputs {
            log_estimates: theta,
            row_weights: w,
            precision_sum,
        }
    }

    #[test]
    fn constant_sample_gives_degenerate_intervals() {
        let theta = [1000f64.ln(); 50];
        let w = [1.0; 50];
        for kind in [IntervalType::Percentile, IntervalType::Var, IntervalType::Cox] {
            let (lo, hi) = confidence_interval(&inputs(&theta, &w, 0.0), kind, 0.05).unwrap();
            assert_eq!(lo, hi, "{kind}");
            assert!((lo - 1000.0).abs() < 1e-9, "{kind}: {lo}");
        }
    }

    #[test]
    fn percentile_endpoints_are_type7_quantiles() {
        // exp(theta) = 2, 4, ..., 2^11: eleven points, h = 10 * level.
        let theta: Vec<f64> = (1..=11).map(|k| (k as f64) * 2f64.ln()).collect();
        let w = vec![1.0; 11];
        let (lo, hi) =
            confidence_interval(&inputs(&theta, &w, 0.0), IntervalType::Percentile, 0.2).unwrap();
        // level 0.1 -> h = 1 -> second order statistic; level 0.9 -> h = 9 -> tenth.
        assert!((lo - 4.0).abs() < 1e-12, "{lo}");
        assert!((hi - 1024.0).abs() < 1e-9, "{hi}");
        let (lo, _) =
            confidence_interval(&inputs(&theta, &w, 0.0), IntervalType::Percentile, 0.05).unwrap();
        // h = 0.25: 2 + 0.25 * (4 - 2)
        assert!((lo - 2.5).abs() < 1e-12, "{lo}");
    }

    #[test]
    fn var_interval_uses_precision_sum() {
        // Precision [[2, -1], [-1, 2]] sums to 2, so V = 0.5.
        let theta = [0.1, 0.3, -0.2, 0.0];
        let w = [1.0; 4];
        let (lo, hi) = confidence_interval(&inputs(&theta, &w, 2.0), IntervalType::Var, 0.05).unwrap();
        let centre = 0.05;
        assert!((lo - (centre - 2.0 * 0.5f64.sqrt()).exp()).abs() < 1e-12);
        assert!((hi - (centre + 2.0 * 0.5f64.sqrt()).exp()).abs() < 1e-12);
    }

    #[test]
    fn cox_interval_matches_formula() {
        let theta = [1.0, 2.0, 3.0, 4.0];
        let w = [1.0; 4];
        let (lo, hi) = confidence_interval(&inputs(&theta, &w, 1.0), IntervalType::Cox, 0.05).unwrap();
        let s2: f64 = 5.0 / 3.0;
        let half = 1.96 * (s2 / 4.0 + s2 * s2 / 6.0).sqrt();
        let centre = 2.5 + s2 / 2.0;
        assert!((lo - (centre - half).exp()).abs() < 1e-9 * lo);
        assert!((hi - (centre + half).exp()).abs() < 1e-9 * hi);
        assert!(lo < centre.exp() && centre.exp() < hi);
    }

    #[test]
    fn interval_errors() {
        let theta = [1.0];
        let w = [1.0];
        assert!(confidence_interval(&inputs(&theta, &w, 1.0), IntervalType::Cox, 0.05).is_err());
        assert!(confidence_interval(&inputs(&theta, &w, 1.0), IntervalType::Var, 0.05).is_err());
        assert!(confidence_interval(&inputs(&theta, &w, 1.0), IntervalType::Percentile, 0.05).is_ok());
        assert!(confidence_interval(&inputs(&theta, &w, 1.0), IntervalType::Percentile, 1.5).is_err());
    }

    #[test]
    fn weighted_quantile_with_equal_weights_matches_unweighted_rule() {
        let v = [5.0, 1.0, 3.0, 9.0, 7.0];
        for level in [0.0, 0.1, 0.25, 0.5, 0.8, 1.0] {
            let a = weighted_quantile(&v, &[1.0; 5], level);
            // Nudge one weight by nothing measurable to force the weighted branch.
            let b = weighted_quantile(&v, &[1.0, 1.0, 1.0, 1.0, 1.0 + 1e-15], level);
            assert!((a - b).abs() < 1e-9, "{level}: {a} vs {b}");
        }
    }

    #[test]
    fn heavier_weight_pulls_quantiles() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        let even = weighted_quantile(&v, &[1.0; 10], 0.5);
        assert_eq!(even, 5.5);
        let mut w = [1.0; 10];
        w[0] = 10.0;
        let heavy_bottom = weighted_quantile(&v, &w, 0.5);
        let mut w = [1.0; 10];
        w[9] = 10.0;
        let heavy_top = weighted_quantile(&v, &w, 0.5);
        assert!(heavy_bottom < even, "{heavy_bottom} {even}");
        assert!(heavy_top > even, "{heavy_top} {even}");
        assert!((heavy_bottom + heavy_top - 11.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles_are_monotone_in_level() {
        let v = [0.3, 2.0, 1.1, 5.0, 4.4, 0.9];
        let w = [0.2, 1.0, 0.7, 0.05, 0.6, 0.3];
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=100 {
            let q = weighted_quantile(&v, &w, i as f64 / 100.0);
            assert!(q >= prev);
            prev = q;
        }
        assert_eq!(weighted_quantile(&v, &w, 0.0), 0.3);
        assert_eq!(weighted_quantile(&v, &w, 1.0), 5.0);
    }
}
