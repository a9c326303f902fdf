use serde::{Deserialize, Serialize};

use super::EstimateError;
use crate::sampling::{classify_sibling_group, BetaParams, DrawPlan, SiblingGroup};
use crate::tree::{path_to_leaf, PopTree, RootPath};

/// Closed-form moments of a path's back-calculated estimate
/// `D / prod(p_e)` with independent `p_e ~ Beta(alpha_e, beta_e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticMoments {
    /// Requires `alpha_e > 1` on every edge.
    pub mean: Option<f64>,
    /// Requires `alpha_e > 2` on every edge.
    pub variance: Option<f64>,
}

/// Uses `E[p^-1] = (a + b - 1) / (a - 1)` and
/// `E[p^-2] = (a + b - 1)(a + b - 2) / ((a - 1)(a - 2))` for `p ~ Beta(a, b)`;
/// the variance is `E[theta^2] - E[theta]^2`.
pub fn analytic_path_moments(
    path: &RootPath,
    betas: &[BetaParams],
) -> Result<AnalyticMoments, EstimateError> {
    if betas.len() != path.edges.len() {
        return Err(EstimateError::InvalidMatrix(format!(
            "path to {} has {} edges but {} Beta parameters were given",
            path.leaf,
            path.edges.len(),
            betas.len()
        )));
    }
    let count = path.count.ok_or(EstimateError::MissingCount {
        leaf: path.leaf.clone(),
    })? as f64;
    Ok(moments(count, betas))
}

pub(crate) fn moments(count: f64, betas: &[BetaParams]) -> AnalyticMoments {
    let mean = betas
        .iter()
        .all(|b| b.alpha > 1.0)
        .then(|| {
            count
                * betas
                    .iter()
                    .map(|b| (b.alpha + b.beta - 1.0) / (b.alpha - 1.0))
                    .product::<f64>()
        });
    let second = betas
        .iter()
        .all(|b| b.alpha > 2.0)
        .then(|| {
            count
                * count
                * betas
                    .iter()
                    .map(|b| {
                        let s = b.alpha + b.beta;
                        (s - 1.0) * (s - 2.0) / ((b.alpha - 1.0) * (b.alpha - 2.0))
                    })
                    .product::<f64>()
        });
    AnalyticMoments {
        mean,
        variance: second.zip(mean).map(|(s, m)| s - m * m),
    }
}

/// Marginal Beta parameters along the path to `leaf` when every group on it
/// is a plain single-survey Dirichlet: member `i` is `Beta(a_i, a_T - a_i)`.
/// `None` when some group is sampled any other way.
pub fn dirichlet_path_betas(tree: &PopTree, leaf: &str) -> Option<Vec<BetaParams>> {
    let path = path_to_leaf(tree, leaf).ok()?;
    path.nodes
        .iter()
        .map(|&node| {
            let parent = tree.parent(node)?;
            let member = tree.children(parent).iter().position(|&c| c == node)?;
            let plan = classify_sibling_group(&SiblingGroup::from_tree(tree, parent));
            if !plan.fixed.is_empty() {
                return None;
            }
            match plan.draw? {
                DrawPlan::Dirichlet {
                    members,
                    concentrations,
                    remainder,
                } => {
                    let i = members.iter().position(|&m| m == member)?;
                    let total = concentrations.iter().sum::<f64>() + remainder.unwrap_or(0.0);
                    Some(BetaParams {
                        alpha: concentrations[i],
                        beta: total - concentrations[i],
                    })
                }
                _ => None,
            }
        })
        .collect()
}
