use std::io::Read;

use indexmap::IndexMap;
use nalgebra::DMatrix;

use super::interval::{interval_with_anchor, Anchor};
use super::weights::{combine, weighted_mean};
use super::{
    report_from_samples, wmm_estimate, CombinationSummary, EstimateConfig, EstimateError,
    EstimateReport, IntervalInputs, StageTwoSummary,
};
use crate::estimate::matrix::draw_samples;
use crate::tree::{csv_error, parse_count, parse_label, NodeId, PopTree, TableError};

pub const DEFAULT_COMBINATION_CAP: usize = 4096;

/// Additional `(estimate, total)` surveys per edge, keyed by `(from, to)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlternateSources {
    entries: IndexMap<(String, String), Vec<(u64, u64)>>,
}

impl AlternateSources {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, from: impl Into<String>, to: impl Into<String>, estimate: u64, total: u64) {
        self.entries
            .entry((from.into(), to.into()))
            .or_default()
            .push((estimate, total));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn get(&self, from: &str, to: &str) -> Option<&[(u64, u64)]> {
        self.entries
            .get(&(from.to_owned(), to.to_owned()))
            .map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &[(u64, u64)])> + '_ {
        self.entries
            .iter()
            .map(|((f, t), v)| (f.as_str(), t.as_str(), v.as_slice()))
    }
}

/// Reads a `from,to,Estimate,Total` table of alternate surveys. An edge may
/// appear on several rows.
pub fn parse_alternate_sources<R: Read>(source: R) -> Result<AlternateSources, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut rows = reader.records();
    let header = rows.next().ok_or(TableError::MissingHeader)?.map_err(csv_error)?;
    if header.iter().collect::<Vec<_>>() != ["from", "to", "Estimate", "Total"] {
        return Err(TableError::BadHeader {
            found: header.iter().map(str::to_owned).collect(),
        });
    }
    let mut sources = AlternateSources::new();
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 4 {
            return Err(TableError::Arity {
                line,
                expected: 4,
                found: row.len(),
            });
        }
        let from = parse_label(&row[0], line, "from")?;
        let to = parse_label(&row[1], line, "to")?;
        let estimate = parse_count(&row[2], line, "Estimate")?;
        let total = parse_count(&row[3], line, "Total")?;
        let (Some(estimate), Some(total)) = (estimate, total) else {
            return Err(TableError::IncompleteSurvey { line });
        };
        if total == 0 {
            return Err(TableError::ZeroTotal { line });
        }
        if estimate > total {
            return Err(TableError::EstimateExceedsTotal { line, estimate, total });
        }
        sources.add(from, to, estimate, total);
    }
    Ok(sources)
}

/// Source choices for one edge: the table's own survey (when it has one)
/// followed by the alternates.
struct EdgeChoices {
    node: NodeId,
    name: String,
    choices: Vec<Option<(u64, u64)>>,
}

fn edge_choices(tree: &PopTree, alternates: &AlternateSources) -> Result<Vec<EdgeChoices>, EstimateError> {
    let mut out = Vec::new();
    for (from, to, surveys) in alternates.iter() {
        let node = tree
            .node(to)
            .filter(|&n| tree.parent(n).map(|p| tree.label(p)) == Some(from))
            .ok_or_else(|| EstimateError::UnknownEdge {
                from: from.to_owned(),
                to: to.to_owned(),
            })?;
        for &(estimate, total) in surveys {
            if total == 0 || estimate > total {
                return Err(EstimateError::InvalidSource {
                    from: from.to_owned(),
                    to: to.to_owned(),
                    reason: format!("estimate {estimate} with total {total}"),
                });
            }
        }
        let mut choices = Vec::with_capacity(surveys.len() + 1);
        if tree.evidence(node).is_informed() {
            choices.push(None);
        }
        choices.extend(surveys.iter().copied().map(Some));
        out.push(EdgeChoices {
            node,
            name: format!("{from}->{to}"),
            choices,
        });
    }
    out.sort_by_key(|c| c.node);
    Ok(out)
}

fn combination_tree(tree: &PopTree, edges: &[EdgeChoices], picks: &[usize]) -> PopTree {
    let mut current: Option<PopTree> = None;
    for (edge, &pick) in edges.iter().zip(picks) {
        if let Some((estimate, total)) = edge.choices[pick] {
            let base = current.as_ref().unwrap_or(tree);
            current = Some(base.with_survey(edge.node, estimate, total));
        }
    }
    current.unwrap_or_else(|| tree.clone())
}

/// Mixed-radix decoding, last edge varying fastest.
fn decode(mut index: usize, edges: &[EdgeChoices]) -> Vec<usize> {
    let mut picks = vec![0; edges.len()];
    for (slot, edge) in picks.iter_mut().zip(edges).rev() {
        *slot = index % edge.choices.len();
        index /= edge.choices.len();
    }
    picks
}

/// Seed for combination `c`; combination 0 keeps the run seed.
fn combination_seed(seed: u64, c: usize) -> u64 {
    if c == 0 {
        return seed;
    }
    let mut z = seed ^ (c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Estimates the root when some edges have several candidate surveys.
///
/// Every combination of source choices is estimated on its own; the per-row
/// combined log estimates of the combinations are then combined again with
/// variance-minimizing weights. Per-leaf and per-edge summaries in the report
/// come from the first combination (every edge on its first listed source).
pub fn two_stage_estimate(
    tree: &PopTree,
    alternates: &AlternateSources,
    config: &EstimateConfig,
    cap: usize,
) -> Result<EstimateReport, EstimateError> {
    config.validate()?;
    let edges = edge_choices(tree, alternates)?;
    let count = edges
        .iter()
        .try_fold(1u128, |acc, e| acc.checked_mul(e.choices.len() as u128))
        .unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(EstimateError::TooManyCombinations { count, cap });
    }
    let count = count as usize;
    if count == 1 {
        return wmm_estimate(&combination_tree(tree, &edges, &decode(0, &edges)), config);
    }

    let m = config.samples;
    let mut thetas = DMatrix::zeros(m, count);
    let mut log_joint = vec![0.0; m];
    let mut first_values: Vec<Vec<(String, f64)>> = Vec::with_capacity(count);
    let mut first_report = None;
    let mut summaries = Vec::with_capacity(count);
    let mut leaf_weights: Vec<Vec<(String, f64)>> = Vec::with_capacity(count);

    for c in 0..count {
        let picks = decode(c, &edges);
        let combo_tree = combination_tree(tree, &edges, &picks);
        let samples = draw_samples(&combo_tree, m, combination_seed(config.seed, c), config.max_attempts)?;
        let matrix = &samples.matrix;
        let w = combine(matrix.log_values(), matrix.row_weights()).weights;
        for row in 0..m {
            thetas[(row, c)] = (0..matrix.cols()).map(|j| w[j] * matrix.log_values()[(row, j)]).sum();
            log_joint[row] += matrix.row_weights()[row].ln();
        }
        let column: Vec<f64> = thetas.column(c).iter().copied().collect();
        let log_root = weighted_mean(&column, matrix.row_weights());
        summaries.push(CombinationSummary {
            sources: edges
                .iter()
                .zip(&picks)
                .map(|(e, &p)| (e.name.clone(), p))
                .collect(),
            root_estimate: log_root.exp(),
            weight: 0.0,
        });
        first_values.push(
            matrix
                .leaves()
                .iter()
                .enumerate()
                .map(|(j, l)| (l.clone(), matrix.values()[(0, j)]))
                .collect(),
        );
        leaf_weights.push(matrix.leaves().iter().cloned().zip(w).collect());
        if c == 0 {
            first_report = Some(report_from_samples(&combo_tree, &samples, config)?);
        }
    }

    let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(EstimateError::VanishingWeights);
    }
    let row_weights: Vec<f64> = log_joint.iter().map(|lw| (lw - max).exp()).collect();
    let stage_two = combine(&thetas, &row_weights);
    let psi: Vec<f64> = (0..m)
        .map(|row| (0..count).map(|c| stage_two.weights[c] * thetas[(row, c)]).sum())
        .collect();
    let anchor = Anchor {
        log: psi[0],
        value: first_values
            .iter()
            .zip(&leaf_weights)
            .zip(&stage_two.weights)
            .map(|((values, weights), big_w)| {
                values
                    .iter()
                    .zip(weights)
                    .map(|((_, v), (_, w))| v.powf(big_w * w))
                    .product::<f64>()
            })
            .product(),
    };
    let log_root = weighted_mean(&psi, &row_weights);
    let inputs = IntervalInputs {
        log_estimates: &psi,
        row_weights: &row_weights,
        precision_sum: stage_two.precision_sum,
    };
    let (lo, hi) = interval_with_anchor(&inputs, config.interval, config.alpha, anchor)?;

    let mut effective: IndexMap<String, f64> = IndexMap::new();
    for (weights, big_w) in leaf_weights.iter().zip(&stage_two.weights) {
        for (leaf, w) in weights {
            *effective.entry(leaf.clone()).or_insert(0.0) += big_w * w;
        }
    }
    for (summary, &w) in summaries.iter_mut().zip(&stage_two.weights) {
        summary.weight = w;
    }

    let mut report = first_report.expect("at least one combination");
    report.root_estimate = anchor.exp(log_root);
    report.rounded_estimate = report.root_estimate.round() as u64;
    report.uncertainty = [lo, hi];
    report.weights = effective;
    report.log_estimates = psi;
    report.row_weights = row_weights;
    report.stage_two = Some(StageTwoSummary {
        combinations: summaries,
        weight_fallback: stage_two.fallback,
    });
    Ok(report)
}
