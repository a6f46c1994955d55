//! Occupancy-measure LP formulations.
//!
//! All programs share the flow-conservation rows over `x(s, a) >= 0`:
//!
//! ```text
//! sum_a x(s, a) - gamma * sum_{s', a'} x(s', a') T(s', a', s) = [s == s0]
//! ```
//!
//! On top of those sit the optimal-value program, the per-state superset
//! tests run in the user's model, and the query program run in the agent's
//! model whose slack variables `d` flag conflicting candidates.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::expectation::{ElementForm, ExpectationSet, PlanningFunction};
use crate::mdp::{Domain, ModelError, OccupancyVector, Policy, RewardFunction};
use crate::simplex::{self, LpError, LpProblem, LpStatus, Relation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] LpError),
    #[error("expectation element {0} is not of the form <{{s}}, =, 0> or <{{s}}, >, 0>")]
    UnsupportedExpectationForm(usize),
    #[error("noisy-rational threshold {threshold} exceeds the optimal value {optimum}")]
    ThresholdAboveOptimum { threshold: f64, optimum: f64 },
    #[error("invalid formulation parameter: {0}")]
    Params(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Numerical knobs of the formulations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormulationParams {
    /// Weight of the visitation bonus in the forbidden-candidate test.
    pub alpha: f64,
    /// Minimum occupancy that counts as visiting a state.
    pub eps_visit: f64,
    /// Half-width of the optimal-value band, relative to `max(1, |V*|)`.
    pub value_slack: f64,
    /// Occupancies and slacks at or below this count as zero.
    pub d_threshold: f64,
    /// Margin standing in for strict `>` in the noisy-rational tests.
    pub eps_strict: f64,
}

impl Default for FormulationParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            eps_visit: 1e-4,
            value_slack: 1e-11,
            d_threshold: 1e-7,
            eps_strict: 1e-6,
        }
    }
}

impl FormulationParams {
    pub fn validate(&self) -> Result<(), FormulationError> {
        let positive = [
            ("alpha", self.alpha),
            ("eps_visit", self.eps_visit),
            ("d_threshold", self.d_threshold),
            ("eps_strict", self.eps_strict),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(FormulationError::Params(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.value_slack.is_finite() && self.value_slack >= 0.0) {
            return Err(FormulationError::Params(format!(
                "value_slack must be nonnegative, got {}",
                self.value_slack
            )));
        }
        Ok(())
    }

    fn slack_for(&self, vstar: f64) -> f64 {
        self.value_slack * vstar.abs().max(1.0)
    }
}

/// Flow-conservation rows over the first `domain.num_pairs()` columns of an
/// LP with `num_vars` columns.
pub fn flow_constraints(domain: &Domain, lp: &mut LpProblem) {
    let ns = domain.num_states();
    let na = domain.num_actions();
    let gamma = domain.gamma();
    let mut rows = vec![vec![0.0; lp.num_vars]; ns];
    for (s, row) in rows.iter_mut().enumerate() {
        for a in 0..na {
            row[domain.pair_index(s, a)] += 1.0;
        }
    }
    for (s, a, next, p) in domain.transition_entries() {
        rows[next][domain.pair_index(s, a)] -= gamma * p;
    }
    for (s, coeffs) in rows.into_iter().enumerate() {
        let rhs = if s == domain.start() { 1.0 } else { 0.0 };
        lp.add(coeffs, Relation::Eq, rhs);
    }
}

fn state_terms(domain: &Domain, s: usize, coeff: f64) -> Vec<(usize, f64)> {
    (0..domain.num_actions())
        .map(|a| (domain.pair_index(s, a), coeff))
        .collect()
}

fn reward_terms(reward: &RewardFunction) -> Vec<(usize, f64)> {
    reward
        .values()
        .iter()
        .enumerate()
        .filter(|(_, r)| **r != 0.0)
        .map(|(j, &r)| (j, r))
        .collect()
}

fn occupancy_from_point(domain: &Domain, point: &[f64]) -> OccupancyVector {
    OccupancyVector::from_values(domain.num_actions(), point[..domain.num_pairs()].to_vec())
}

/// Result of the optimal-value program.
#[derive(Clone, Debug)]
pub struct OptimalSolveResult {
    pub value: f64,
    pub occupancy: OccupancyVector,
    pub policy: Policy,
}

/// Maximizes `sum x r` over the flow polytope.
pub fn solve_optimal(domain: &Domain, reward: &RewardFunction) -> Result<OptimalSolveResult, FormulationError> {
    reward.ensure_matches(domain)?;
    let mut lp = LpProblem::with_objective(reward.values().to_vec());
    flow_constraints(domain, &mut lp);
    let out = simplex::solve(&lp)?;
    let point = match (out.status, out.point) {
        (LpStatus::Optimal, Some(p)) => p,
        (status, _) => {
            return Err(FormulationError::Internal(format!(
                "optimal-value LP reported {status}"
            )))
        }
    };
    let occupancy = occupancy_from_point(domain, &point);
    let value = occupancy.value(reward);
    let policy = extract_policy(&occupancy, FormulationParams::default().d_threshold);
    Ok(OptimalSolveResult {
        value,
        occupancy,
        policy,
    })
}

/// Flow rows plus `vstar - slack <= sum x r <= vstar + slack`.
fn value_band_lp(domain: &Domain, reward: &RewardFunction, vstar: f64, params: &FormulationParams) -> LpProblem {
    let mut lp = LpProblem::new(domain.num_pairs());
    flow_constraints(domain, &mut lp);
    let terms = reward_terms(reward);
    let slack = params.slack_for(vstar);
    lp.add_sparse(&terms, Relation::Ge, vstar - slack);
    lp.add_sparse(&terms, Relation::Le, vstar + slack);
    lp
}

/// Maximizes `sum x r + alpha x(s_i)` on the optimal face and reports whether
/// `s_i` stays unvisited, together with the occupancy achieved at `s_i`.
pub fn test_forbidden_candidate(
    domain: &Domain,
    reward: &RewardFunction,
    vstar: f64,
    s_i: usize,
    params: &FormulationParams,
) -> Result<(bool, f64), FormulationError> {
    let mut lp = value_band_lp(domain, reward, vstar, params);
    lp.objective = reward.values().to_vec();
    for (j, c) in state_terms(domain, s_i, params.alpha) {
        lp.objective[j] += c;
    }
    let out = simplex::solve(&lp)?;
    let point = match (out.status, out.point) {
        (LpStatus::Optimal, Some(p)) => p,
        (status, _) => {
            return Err(FormulationError::Internal(format!(
                "forbidden test for state {s_i} reported {status}"
            )))
        }
    };
    let visit = occupancy_from_point(domain, &point).state(s_i);
    Ok((visit <= params.d_threshold, visit))
}

/// True when no optimal occupancy avoids `s_i`, i.e. the optimal face
/// intersected with `x(s_i) = 0` is empty.
pub fn test_goal_candidate(
    domain: &Domain,
    reward: &RewardFunction,
    vstar: f64,
    s_i: usize,
    params: &FormulationParams,
) -> Result<bool, FormulationError> {
    let mut lp = value_band_lp(domain, reward, vstar, params);
    lp.add_sparse(&state_terms(domain, s_i, 1.0), Relation::Eq, 0.0);
    Ok(simplex::solve(&lp)?.status == LpStatus::Infeasible)
}

/// Whether some policy with value at least `threshold + eps_strict` avoids
/// `s_i`.
pub fn noisy_avoid_feasible(
    domain: &Domain,
    reward: &RewardFunction,
    threshold: f64,
    s_i: usize,
    params: &FormulationParams,
) -> Result<bool, FormulationError> {
    let mut lp = LpProblem::new(domain.num_pairs());
    flow_constraints(domain, &mut lp);
    lp.add_sparse(&reward_terms(reward), Relation::Ge, threshold + params.eps_strict);
    lp.add_sparse(&state_terms(domain, s_i, 1.0), Relation::Eq, 0.0);
    Ok(simplex::solve(&lp)?.status == LpStatus::Optimal)
}

/// Occupancy of `s_i` at the maximizer of `sum x r + alpha x(s_i)` over
/// policies with value at least `threshold + eps_strict`; `None` if there
/// are none.
pub fn noisy_visit_occupancy(
    domain: &Domain,
    reward: &RewardFunction,
    threshold: f64,
    s_i: usize,
    params: &FormulationParams,
) -> Result<Option<f64>, FormulationError> {
    let mut lp = LpProblem::with_objective(reward.values().to_vec());
    for (j, c) in state_terms(domain, s_i, params.alpha) {
        lp.objective[j] += c;
    }
    flow_constraints(domain, &mut lp);
    lp.add_sparse(&reward_terms(reward), Relation::Ge, threshold + params.eps_strict);
    let out = simplex::solve(&lp)?;
    Ok(match (out.status, out.point) {
        (LpStatus::Optimal, Some(p)) => Some(occupancy_from_point(domain, &p).state(s_i)),
        _ => None,
    })
}

/// Raw test outcomes for one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateEvidence {
    /// Occupancy of the state under the visit-maximizing test LP; `None` when
    /// that LP had no feasible point.
    pub visit_occupancy: Option<f64>,
    /// Whether a qualifying policy that never enters the state exists.
    pub avoid_feasible: bool,
}

/// Candidate forbidden and goal states inferred in the user's model.
#[derive(Clone, Debug, PartialEq)]
pub struct SupersetResult {
    pub forbidden_candidates: BTreeSet<usize>,
    pub goal_candidates: BTreeSet<usize>,
    pub per_state_evidence: Vec<StateEvidence>,
    /// Optimal start value of the user's model.
    pub optimal_value: f64,
}

/// Runs both membership tests on every state, in parallel across states.
pub fn compute_supersets(
    domain: &Domain,
    reward: &RewardFunction,
    planning: PlanningFunction,
    params: &FormulationParams,
) -> Result<SupersetResult, FormulationError> {
    params.validate()?;
    let vstar = solve_optimal(domain, reward)?.value;
    let evidence: Vec<StateEvidence> = match planning {
        PlanningFunction::OptimalSet => (0..domain.num_states())
            .into_par_iter()
            .map(|s| {
                let (_, visit) = test_forbidden_candidate(domain, reward, vstar, s, params)?;
                let must_visit = test_goal_candidate(domain, reward, vstar, s, params)?;
                Ok(StateEvidence {
                    visit_occupancy: Some(visit),
                    avoid_feasible: !must_visit,
                })
            })
            .collect::<Result<_, FormulationError>>()?,
        PlanningFunction::NoisyRational { threshold } => {
            if threshold > vstar {
                return Err(FormulationError::ThresholdAboveOptimum {
                    threshold,
                    optimum: vstar,
                });
            }
            (0..domain.num_states())
                .into_par_iter()
                .map(|s| {
                    Ok(StateEvidence {
                        visit_occupancy: noisy_visit_occupancy(domain, reward, threshold, s, params)?,
                        avoid_feasible: noisy_avoid_feasible(domain, reward, threshold, s, params)?,
                    })
                })
                .collect::<Result<_, FormulationError>>()?
        }
    };

    let mut forbidden = BTreeSet::new();
    let mut goals = BTreeSet::new();
    for (s, ev) in evidence.iter().enumerate() {
        let visited = ev.visit_occupancy.is_some_and(|v| v > params.d_threshold);
        match planning {
            PlanningFunction::OptimalSet => {
                if !visited {
                    forbidden.insert(s);
                }
                if !ev.avoid_feasible {
                    goals.insert(s);
                }
            }
            PlanningFunction::NoisyRational { .. } => {
                if ev.avoid_feasible {
                    forbidden.insert(s);
                }
                if visited {
                    goals.insert(s);
                }
            }
        }
    }
    Ok(SupersetResult {
        forbidden_candidates: forbidden,
        goal_candidates: goals,
        per_state_evidence: evidence,
        optimal_value: vstar,
    })
}

/// Which kind of constraint a slack variable relaxes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryKind {
    Forbidden,
    Goal,
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::Forbidden => "forbidden",
            QueryKind::Goal => "goal",
        })
    }
}

/// Soft and hard state constraints for the query program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryConstraints {
    pub forbidden_candidates: BTreeSet<usize>,
    pub goal_candidates: BTreeSet<usize>,
    pub confirmed_forbidden: BTreeSet<usize>,
    pub confirmed_goal: BTreeSet<usize>,
}

/// The query program and the meaning of its slack columns.
#[derive(Clone, Debug)]
pub struct QueryLp {
    pub problem: LpProblem,
    /// Occupancy columns come first; slack column `num_pairs + i` relaxes
    /// `slacks[i]`.
    pub num_pairs: usize,
    pub slacks: Vec<(usize, QueryKind)>,
}

impl QueryLp {
    /// Human-readable column labels, for LP dumps.
    pub fn column_labels(&self, domain: &Domain) -> Vec<String> {
        let mut labels = Vec::with_capacity(self.problem.num_vars);
        for s in 0..domain.num_states() {
            for a in 0..domain.num_actions() {
                labels.push(format!("x({},{})", domain.state_name(s), domain.action_name(a)));
            }
        }
        for &(s, kind) in &self.slacks {
            labels.push(format!("d_{kind}({})", domain.state_name(s)));
        }
        labels
    }
}

/// Builds the query program over the agent's kernel:
///
/// - maximize `-sum d`
/// - forbidden candidate `s`: `x(s) - d = 0`
/// - goal candidate `s`: `x(s) + d >= eps_visit`
/// - confirmed forbidden `s`: `x(s) = 0`
/// - confirmed goal `s`: `x(s) >= eps_visit`
pub fn build_query_lp(robot: &Domain, sets: &QueryConstraints, params: &FormulationParams) -> QueryLp {
    let np = robot.num_pairs();
    let mut slacks: Vec<(usize, QueryKind)> = sets
        .forbidden_candidates
        .iter()
        .map(|&s| (s, QueryKind::Forbidden))
        .chain(sets.goal_candidates.iter().map(|&s| (s, QueryKind::Goal)))
        .collect();
    slacks.sort_unstable();
    let mut lp = LpProblem::new(np + slacks.len());
    for j in np..lp.num_vars {
        lp.objective[j] = -1.0;
    }
    flow_constraints(robot, &mut lp);
    for (i, &(s, kind)) in slacks.iter().enumerate() {
        let d = np + i;
        let mut terms = state_terms(robot, s, 1.0);
        match kind {
            QueryKind::Forbidden => {
                terms.push((d, -1.0));
                lp.add_sparse(&terms, Relation::Eq, 0.0);
            }
            QueryKind::Goal => {
                terms.push((d, 1.0));
                lp.add_sparse(&terms, Relation::Ge, params.eps_visit);
            }
        }
    }
    for &s in &sets.confirmed_forbidden {
        lp.add_sparse(&state_terms(robot, s, 1.0), Relation::Eq, 0.0);
    }
    for &s in &sets.confirmed_goal {
        lp.add_sparse(&state_terms(robot, s, 1.0), Relation::Ge, params.eps_visit);
    }
    QueryLp {
        problem: lp,
        num_pairs: np,
        slacks,
    }
}

/// Outcome of solving a query program.
#[derive(Clone, Debug)]
pub enum QuerySolve {
    /// The hard constraints admit no occupancy.
    Infeasible,
    Feasible {
        occupancy: OccupancyVector,
        /// Slack value per entry of [`QueryLp::slacks`].
        slack_values: Vec<f64>,
    },
}

pub fn solve_query_lp(robot: &Domain, query: &QueryLp) -> Result<QuerySolve, FormulationError> {
    let out = simplex::solve(&query.problem)?;
    match (out.status, out.point) {
        (LpStatus::Optimal, Some(p)) => Ok(QuerySolve::Feasible {
            occupancy: occupancy_from_point(robot, &p),
            slack_values: p[query.num_pairs..].to_vec(),
        }),
        (LpStatus::Infeasible, _) => Ok(QuerySolve::Infeasible),
        (status, _) => Err(FormulationError::Internal(format!("query LP reported {status}"))),
    }
}

/// Policy induced by an occupancy: proportional action split on states with
/// marginal above `d_threshold`, lowest-index action elsewhere.
pub fn extract_policy(occ: &OccupancyVector, d_threshold: f64) -> Policy {
    let na = occ.num_actions();
    let rows = (0..occ.num_states())
        .map(|s| {
            let total = occ.state(s);
            let mut row = vec![0.0; na];
            if total > d_threshold {
                for (a, p) in row.iter_mut().enumerate() {
                    *p = occ.get(s, a) / total;
                }
            } else {
                row[0] = 1.0;
            }
            row
        })
        .collect();
    Policy::Stochastic(rows)
}

fn split_expectations(expectations: &ExpectationSet) -> Result<(Vec<usize>, Vec<usize>), FormulationError> {
    let (mut avoid, mut visit) = (Vec::new(), Vec::new());
    for (i, e) in expectations.iter().enumerate() {
        match e.form() {
            Some(ElementForm::Avoid(s)) => avoid.push(s),
            Some(ElementForm::Visit(s)) => visit.push(s),
            None => return Err(FormulationError::UnsupportedExpectationForm(i)),
        }
    }
    Ok((avoid, visit))
}

/// Whether every optimal policy of the user's model satisfies every element.
pub fn is_human_sufficient(
    human: &Domain,
    reward: &RewardFunction,
    expectations: &ExpectationSet,
    params: &FormulationParams,
) -> Result<bool, FormulationError> {
    let (avoid, visit) = split_expectations(expectations)?;
    expectations.validate(human.num_states())?;
    if avoid.is_empty() && visit.is_empty() {
        return Ok(true);
    }
    let vstar = solve_optimal(human, reward)?.value;
    for s in avoid {
        if !test_forbidden_candidate(human, reward, vstar, s, params)?.0 {
            return Ok(false);
        }
    }
    for s in visit {
        if !test_goal_candidate(human, reward, vstar, s, params)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether some optimal policy of the agent's model violates some element.
pub fn is_misspecified(
    robot: &Domain,
    reward: &RewardFunction,
    expectations: &ExpectationSet,
    params: &FormulationParams,
) -> Result<bool, FormulationError> {
    Ok(!is_human_sufficient(robot, reward, expectations, params)?)
}
