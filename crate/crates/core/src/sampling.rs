//! Joint sampling of branch probabilities, one sibling group at a time.
//!
//! Each sibling group is classified into a regime from the evidence on its
//! members:
//!
//! * population-level ratios are used as-is ([`Regime::FixedRatios`]);
//! * surveyed members that plausibly come from one survey (one shared total,
//!   estimates summing to at most that total) are drawn jointly from a
//!   Dirichlet on the raw counts;
//! * surveyed members from different surveys with at least one uninformed
//!   sibling are drawn as independent `Beta(a + 1, N - a + 1)` posteriors,
//!   rejected all-or-none until they fit on the simplex;
//! * when every sibling is informed by different surveys the last member is
//!   the pivot: the others are drawn as in the rejection regime, the pivot
//!   takes the residual mass and the draw carries the importance weight
//!   `p^e (1 - p)^(N - e)` from the pivot's own survey.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use thiserror::Error;

use crate::tree::{Evidence, NodeId, PopTree};

pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("group {parent}: sampler expects {expected:?} plan, found {found:?}")]
    WrongRegime {
        parent: String,
        expected: Regime,
        found: Option<Regime>,
    },
    #[error("group {parent}: nonpositive Dirichlet concentration {value}")]
    NonPositiveConcentration { parent: String, value: f64 },
    #[error("group {parent}: invalid Beta({alpha}, {beta})")]
    InvalidBeta { parent: String, alpha: f64, beta: f64 },
    #[error(
        "group {parent}: no feasible draw in {attempts} attempts \
         (empirical acceptance rate {acceptance_rate}); the surveys are nearly contradictory"
    )]
    Exhausted {
        parent: String,
        attempts: u64,
        acceptance_rate: f64,
    },
}

/// Random stream owned by realization `index` of a run seeded with `seed`.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Children of one parent with the evidence on each incoming edge.
#[derive(Debug, Clone, PartialEq)]
pub struct SiblingGroup {
    pub parent: String,
    pub members: Vec<(String, Evidence)>,
}

impl SiblingGroup {
    pub fn from_tree(tree: &PopTree, parent: NodeId) -> Self {
        SiblingGroup {
            parent: tree.label(parent).to_owned(),
            members: tree
                .children(parent)
                .iter()
                .map(|&c| (tree.label(c).to_owned(), tree.evidence(c)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    FixedRatios,
    SingleSurveyDirichlet,
    MultiSurveyRejection,
    MultiSurveyImportance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    /// Flat-prior posterior of a survey with `successes` out of `trials`.
    pub fn posterior(successes: u64, trials: u64) -> Self {
        BetaParams {
            alpha: successes as f64 + 1.0,
            beta: (trials - successes) as f64 + 1.0,
        }
    }
}

/// Members are positions within the sibling group.
#[derive(Debug, Clone, PartialEq)]
pub enum DrawPlan {
    Dirichlet {
        members: Vec<usize>,
        concentrations: Vec<f64>,
        /// Mass of the siblings not drawn individually (`total - sum(estimates)`).
        remainder: Option<f64>,
    },
    Rejection {
        members: Vec<usize>,
        betas: Vec<BetaParams>,
    },
    Importance {
        members: Vec<usize>,
        betas: Vec<BetaParams>,
        pivot: usize,
        /// `(estimate, total)` of the pivot's survey.
        pivot_survey: (u64, u64),
    },
}

impl DrawPlan {
    pub fn regime(&self) -> Regime {
        match self {
            DrawPlan::Dirichlet { .. } => Regime::SingleSurveyDirichlet,
            DrawPlan::Rejection { .. } => Regime::MultiSurveyRejection,
            DrawPlan::Importance { .. } => Regime::MultiSurveyImportance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub parent: String,
    /// Labels of every member of the group, in tree order.
    pub labels: Vec<String>,
    /// Members with population-level ratios.
    pub fixed: Vec<(usize, f64)>,
    pub draw: Option<DrawPlan>,
}

impl SamplingPlan {
    /// Regime of the drawn part, or `FixedRatios` when nothing is drawn.
    /// `None` for an all-uninformed group.
    pub fn regime(&self) -> Option<Regime> {
        match &self.draw {
            Some(draw) => Some(draw.regime()),
            None if !self.fixed.is_empty() => Some(Regime::FixedRatios),
            None => None,
        }
    }

    pub fn fixed_mass(&self) -> f64 {
        self.fixed.iter().map(|&(_, r)| r).sum()
    }

    /// Positions of every member that receives a probability.
    pub fn sampled_members(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.fixed.iter().map(|&(m, _)| m).collect();
        match &self.draw {
            Some(DrawPlan::Dirichlet { members, .. }) | Some(DrawPlan::Rejection { members, .. }) => {
                out.extend(members)
            }
            Some(DrawPlan::Importance { members, pivot, .. }) => {
                out.extend(members);
                out.push(*pivot);
            }
            None => {}
        }
        out.sort_unstable();
        out
    }
}

pub fn classify_sibling_group(group: &SiblingGroup) -> SamplingPlan {
    let mut fixed = Vec::new();
    let mut surveyed = Vec::new();
    let mut has_uninformed = false;
    for (i, (_, evidence)) in group.members.iter().enumerate() {
        match *evidence {
            Evidence::PopulationRatio { estimate, total } => {
                fixed.push((i, estimate as f64 / total as f64))
            }
            Evidence::Survey { estimate, total } => surveyed.push((i, estimate, total)),
            Evidence::Uninformed => has_uninformed = true,
        }
    }

    let draw = match surveyed.as_slice() {
        [] => None,
        [(_, _, first_total), ..] => {
            let single_total = surveyed.iter().all(|&(_, _, t)| t == *first_total);
            let sum: u64 = surveyed.iter().map(|&(_, e, _)| e).sum();
            let members: Vec<usize> = surveyed.iter().map(|&(i, _, _)| i).collect();
            if single_total && sum <= *first_total {
                let rest = first_total - sum;
                Some(DrawPlan::Dirichlet {
                    members,
                    concentrations: surveyed.iter().map(|&(_, e, _)| e as f64).collect(),
                    remainder: (rest > 0).then_some(rest as f64),
                })
            } else if has_uninformed {
                Some(DrawPlan::Rejection {
                    members,
                    betas: surveyed
                        .iter()
                        .map(|&(_, e, t)| BetaParams::posterior(e, t))
                        .collect(),
                })
            } else {
                let (&(pivot, e, t), rest) = surveyed.split_last().unwrap();
                Some(DrawPlan::Importance {
                    members: rest.iter().map(|&(i, _, _)| i).collect(),
                    betas: rest
                        .iter()
                        .map(|&(_, e, t)| BetaParams::posterior(e, t))
                        .collect(),
                    pivot,
                    pivot_survey: (e, t),
                })
            }
        }
    };

    SamplingPlan {
        parent: group.parent.clone(),
        labels: group.members.iter().map(|(l, _)| l.clone()).collect(),
        fixed,
        draw,
    }
}

/// One joint draw for a sibling group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDraw {
    /// `(member position, probability)`, ascending by position.
    pub probabilities: Vec<(usize, f64)>,
    /// Natural log of the importance weight (0 outside the importance regime).
    pub log_weight: f64,
}

impl GroupDraw {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn get(&self, member: usize) -> Option<f64> {
        self.probabilities
            .iter()
            .find(|&&(m, _)| m == member)
            .map(|&(_, p)| p)
    }

    pub fn sum(&self) -> f64 {
        self.probabilities.iter().map(|&(_, p)| p).sum()
    }

    /// Probabilities keyed by member label.
    pub fn labelled<'a>(&self, plan: &'a SamplingPlan) -> Vec<(&'a str, f64)> {
        self.probabilities
            .iter()
            .map(|&(m, p)| (plan.labels[m].as_str(), p))
            .collect()
    }

    fn with_fixed(mut self, plan: &SamplingPlan) -> Self {
        self.probabilities.extend(plan.fixed.iter().copied());
        self.probabilities.sort_unstable_by_key(|&(m, _)| m);
        self
    }
}

fn wrong_regime(plan: &SamplingPlan, expected: Regime) -> SamplingError {
    SamplingError::WrongRegime {
        parent: plan.parent.clone(),
        expected,
        found: plan.regime(),
    }
}

fn beta_sampler(plan: &SamplingPlan, params: &BetaParams) -> Result<Beta<f64>, SamplingError> {
    Beta::new(params.alpha, params.beta).map_err(|_| SamplingError::InvalidBeta {
        parent: plan.parent.clone(),
        alpha: params.alpha,
        beta: params.beta,
    })
}

/// Draws the Dirichlet members of `plan`. The remainder component takes part
/// in the draw but is left out of the result; when the group also has fixed
/// members the drawn values share the mass those leave free.
pub fn sample_dirichlet_group<R: Rng + ?Sized>(
    plan: &SamplingPlan,
    rng: &mut R,
) -> Result<GroupDraw, SamplingError> {
    let Some(DrawPlan::Dirichlet {
        members,
        concentrations,
        remainder,
    }) = &plan.draw
    else {
        return Err(wrong_regime(plan, Regime::SingleSurveyDirichlet));
    };

    let mut gammas = Vec::with_capacity(concentrations.len());
    let mut total = 0.0;
    for &alpha in concentrations.iter().chain(remainder.iter()) {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(SamplingError::NonPositiveConcentration {
                parent: plan.parent.clone(),
                value: alpha,
            });
        }
        let g = Gamma::new(alpha, 1.0)
            .expect("positive shape")
            .sample(rng);
        total += g;
        gammas.push(g);
    }
    let free = 1.0 - plan.fixed_mass();
    let probabilities = members
        .iter()
        .zip(&gammas)
        .map(|(&m, &g)| (m, g / total * free))
        .collect();
    Ok(GroupDraw {
        probabilities,
        log_weight: 0.0,
    })
}

/// Independent Beta draws for `betas`, redrawn as a whole until they sum
/// to less than `capacity`.
fn draw_truncated<R: Rng + ?Sized>(
    plan: &SamplingPlan,
    betas: &[BetaParams],
    capacity: f64,
    rng: &mut R,
    max_attempts: u64,
) -> Result<Vec<f64>, SamplingError> {
    let samplers = betas
        .iter()
        .map(|b| beta_sampler(plan, b))
        .collect::<Result<Vec<_>, _>>()?;
    let mut values = vec![0.0; samplers.len()];
    for _ in 0..max_attempts {
        let mut sum = 0.0;
        for (v, s) in values.iter_mut().zip(&samplers) {
            *v = s.sample(rng);
            sum += *v;
        }
        if sum < capacity && values.iter().all(|&v| v > 0.0) {
            return Ok(values);
        }
    }
    Err(SamplingError::Exhausted {
        parent: plan.parent.clone(),
        attempts: max_attempts,
        acceptance_rate: 0.0,
    })
}

/// All-or-none rejection draw of the independently surveyed members.
pub fn sample_rejection_group<R: Rng + ?Sized>(
    plan: &SamplingPlan,
    rng: &mut R,
    max_attempts: u64,
) -> Result<GroupDraw, SamplingError> {
    let Some(DrawPlan::Rejection { members, betas }) = &plan.draw else {
        return Err(wrong_regime(plan, Regime::MultiSurveyRejection));
    };
    let capacity = 1.0 - plan.fixed_mass();
    let values = draw_truncated(plan, betas, capacity, rng, max_attempts)?;
    Ok(GroupDraw {
        probabilities: members.iter().copied().zip(values).collect(),
        log_weight: 0.0,
    })
}

/// Importance draw for a fully informed group; the pivot takes the residual.
pub fn sample_importance_group<R: Rng + ?Sized>(
    plan: &SamplingPlan,
    rng: &mut R,
    max_attempts: u64,
) -> Result<GroupDraw, SamplingError> {
    let Some(DrawPlan::Importance {
        members,
        betas,
        pivot,
        pivot_survey: (e, n),
    }) = &plan.draw
    else {
        return Err(wrong_regime(plan, Regime::MultiSurveyImportance));
    };
    let capacity = 1.0 - plan.fixed_mass();
    let values = draw_truncated(plan, betas, capacity, rng, max_attempts)?;
    let p_pivot = capacity - values.iter().sum::<f64>();
    let log_weight = xlogy(*e as f64, p_pivot) + xlogy((n - e) as f64, 1.0 - p_pivot);

    let mut probabilities: Vec<(usize, f64)> = members.iter().copied().zip(values).collect();
    probabilities.push((*pivot, p_pivot));
    probabilities.sort_unstable_by_key(|&(m, _)| m);
    Ok(GroupDraw {
        probabilities,
        log_weight,
    })
}

/// `x * ln(y)` with `0 * ln(0) = 0`.
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Draws every member of `plan` that receives a probability, fixed ones included.
pub fn sample_group<R: Rng + ?Sized>(
    plan: &SamplingPlan,
    rng: &mut R,
    max_attempts: u64,
) -> Result<GroupDraw, SamplingError> {
    let draw = match &plan.draw {
        None => GroupDraw {
            probabilities: Vec::new(),
            log_weight: 0.0,
        },
        Some(DrawPlan::Dirichlet { .. }) => sample_dirichlet_group(plan, rng)?,
        Some(DrawPlan::Rejection { .. }) => sample_rejection_group(plan, rng, max_attempts)?,
        Some(DrawPlan::Importance { .. }) => sample_importance_group(plan, rng, max_attempts)?,
    };
    Ok(draw.with_fixed(plan))
}

/// Plan for one sibling group of a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPlan {
    pub parent: NodeId,
    pub plan: SamplingPlan,
}

/// Plans for every sibling group that contains an edge of an informative path,
/// breadth-first by parent.
pub fn plan_tree(tree: &PopTree) -> Vec<GroupPlan> {
    let mut on_path = vec![false; tree.len()];
    for &leaf in tree.informative_leaves() {
        let mut node = leaf;
        while let Some(parent) = tree.parent(node) {
            on_path[node.0] = true;
            node = parent;
        }
    }
    tree.parents()
        .filter(|&p| tree.children(p).iter().any(|c| on_path[c.0]))
        .map(|parent| GroupPlan {
            parent,
            plan: classify_sibling_group(&SiblingGroup::from_tree(tree, parent)),
        })
        .collect()
}

/// One joint draw of branch probabilities over the whole tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    /// Probability of the edge entering each node, indexed by `NodeId`;
    /// `None` for edges that were not sampled.
    pub probabilities: Vec<Option<f64>>,
    /// Sum of the groups' log importance weights.
    pub log_weight: f64,
}

impl Realization {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn probability(&self, node: NodeId) -> Option<f64> {
        self.probabilities[node.0]
    }
}

pub fn sample_realization<R: Rng + ?Sized>(
    tree: &PopTree,
    plans: &[GroupPlan],
    rng: &mut R,
    max_attempts: u64,
) -> Result<Realization, SamplingError> {
    let mut probabilities = vec![None; tree.len()];
    let mut log_weight = 0.0;
    for group in plans {
        let draw = sample_group(&group.plan, rng, max_attempts)?;
        let children = tree.children(group.parent);
        for &(member, p) in &draw.probabilities {
            probabilities[children[member].0] = Some(p);
        }
        log_weight += draw.log_weight;
    }
    Ok(Realization {
        probabilities,
        log_weight,
    })
}
