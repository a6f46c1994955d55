//! Finite MDP domains, rewards, policies and discounted occupancy frequencies.
//!
//! A [`Domain`] is an MDP without its reward: states, actions, a sparse
//! stochastic transition kernel, a discount factor and a start state. The
//! human's belief model and the robot's true model are both `Domain`s over
//! the same state and action index spaces.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Maximum deviation from 1 allowed when a transition row is summed.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Occupancy entries at or above this negative value are clamped to zero.
pub const NEGATIVE_CLAMP: f64 = -1e-9;

/// Tolerance defaults shared by every module.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Flow conservation and mass identity of occupancy vectors.
    pub flow: f64,
    /// Slack used when checking an expectation element against an occupancy.
    pub expectation: f64,
    /// Relative tolerance for declaring two policy values equal.
    pub optimality_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}

pub const TOLERANCES: Tolerances = Tolerances {
    flow: 1e-7,
    expectation: 1e-6,
    optimality_rel: 1e-8,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain has no states")]
    NoStates,
    #[error("domain has no actions")]
    NoActions,
    #[error("duplicate state id `{0}`")]
    DuplicateState(String),
    #[error("duplicate action id `{0}`")]
    DuplicateAction(String),
    #[error("discount factor {0} is outside [0, 1)")]
    Discount(f64),
    #[error("start index {0} is out of range")]
    Start(usize),
    #[error("transition ({state}, {action}) -> {successor} uses an out-of-range index")]
    TransitionIndex {
        state: usize,
        action: usize,
        successor: usize,
    },
    #[error("transition ({state}, {action}) -> {successor} has invalid probability {probability}")]
    Probability {
        state: String,
        action: String,
        successor: String,
        probability: f64,
    },
    #[error("transition probabilities of ({state}, {action}) sum to {sum}, expected 1")]
    NotStochastic { state: String, action: String, sum: f64 },
    #[error("reward has {got} entries, expected {expected}")]
    RewardShape { expected: usize, got: usize },
    #[error("reward at ({state}, {action}) is not finite")]
    NonFiniteReward { state: usize, action: usize },
    #[error("reward differs across actions of state {0}, so it is not state-based")]
    NotStateBased(usize),
    #[error("policy covers {got} states, expected {expected}")]
    PolicyShape { expected: usize, got: usize },
    #[error("policy row for state {state} is invalid: {reason}")]
    PolicyRow { state: usize, reason: String },
    #[error("models do not share state and action spaces")]
    SpaceMismatch,
    #[error("expectation element has an empty state subset")]
    EmptyExpectation,
    #[error("expectation threshold {0} is outside [0, 1]")]
    ExpectationThreshold(f64),
    #[error("expectation element references unknown state index {0}")]
    ExpectationState(usize),
    #[error("flow system solve left residual {0:e}")]
    FlowResidual(f64),
}

/// States, actions, sparse transition kernel, discount and start state.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    states: Vec<String>,
    actions: Vec<String>,
    state_lookup: HashMap<String, usize>,
    action_lookup: HashMap<String, usize>,
    /// Successor lists indexed by `state * num_actions + action`, sorted by
    /// successor index.
    transitions: Vec<Vec<(usize, f64)>>,
    gamma: f64,
    start: usize,
}

impl Domain {
    /// Builds a domain from `(state, action, successor, probability)` triples.
    ///
    /// Repeated triples are summed and zero-probability entries dropped. Every
    /// `(state, action)` row must sum to one.
    pub fn new<I>(
        states: Vec<String>,
        actions: Vec<String>,
        gamma: f64,
        start: usize,
        transitions: I,
    ) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64)>,
    {
        if states.is_empty() {
            return Err(ModelError::NoStates);
        }
        if actions.is_empty() {
            return Err(ModelError::NoActions);
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(ModelError::Discount(gamma));
        }
        if start >= states.len() {
            return Err(ModelError::Start(start));
        }
        let state_lookup = index_names(&states).map_err(ModelError::DuplicateState)?;
        let action_lookup = index_names(&actions).map_err(ModelError::DuplicateAction)?;

        let (ns, na) = (states.len(), actions.len());
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ns * na];
        for (s, a, next, p) in transitions {
            if s >= ns || a >= na || next >= ns {
                return Err(ModelError::TransitionIndex {
                    state: s,
                    action: a,
                    successor: next,
                });
            }
            if !p.is_finite() || p < 0.0 {
                return Err(ModelError::Probability {
                    state: states[s].clone(),
                    action: actions[a].clone(),
                    successor: states[next].clone(),
                    probability: p,
                });
            }
            rows[s * na + a].push((next, p));
        }
        for (idx, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(next, _)| next);
            row.dedup_by(|later, earlier| {
                if later.0 == earlier.0 {
                    earlier.1 += later.1;
                    true
                } else {
                    false
                }
            });
            row.retain(|&(_, p)| p > 0.0);
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(ModelError::NotStochastic {
                    state: states[idx / na].clone(),
                    action: actions[idx % na].clone(),
                    sum,
                });
            }
        }

        Ok(Self {
            states,
            actions,
            state_lookup,
            action_lookup,
            transitions: rows,
            gamma,
            start,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Number of `(state, action)` pairs.
    pub fn num_pairs(&self) -> usize {
        self.states.len() * self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s]
    }

    pub fn action_name(&self, a: usize) -> &str {
        &self.actions[a]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_lookup.get(name).copied()
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_lookup.get(name).copied()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// Flat index of `(s, a)` used by rewards, occupancies and LP columns.
    #[inline]
    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        s * self.actions.len() + a
    }

    /// Successors of `(s, a)` as `(state, probability)`, sorted by state.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[self.pair_index(s, a)]
    }

    /// Iterates every nonzero `(s, a, s', p)` entry of the kernel.
    pub fn transition_entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let na = self.actions.len();
        self.transitions
            .iter()
            .enumerate()
            .flat_map(move |(idx, row)| row.iter().map(move |&(n, p)| (idx / na, idx % na, n, p)))
    }

    /// True when both domains use identical state and action id sequences
    /// and the same start state.
    pub fn shares_spaces_with(&self, other: &Domain) -> bool {
        self.states == other.states && self.actions == other.actions && self.start == other.start
    }

    pub fn ensure_shared_spaces(&self, other: &Domain) -> Result<(), ModelError> {
        if self.shares_spaces_with(other) {
            Ok(())
        } else {
            Err(ModelError::SpaceMismatch)
        }
    }

    /// States reachable from the start with positive probability.
    pub fn reachable_states(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![self.start];
        seen[self.start] = true;
        while let Some(s) = stack.pop() {
            for a in 0..self.num_actions() {
                for &(n, _) in self.successors(s, a) {
                    if !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        seen
    }
}

fn index_names(names: &[String]) -> Result<HashMap<String, usize>, String> {
    let mut map = HashMap::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if map.insert(n.clone(), i).is_some() {
            return Err(n.clone());
        }
    }
    Ok(map)
}

/// Dense reward over `(state, action)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardFunction {
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardFunction {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != num_states * num_actions {
            return Err(ModelError::RewardShape {
                expected: num_states * num_actions,
                got: values.len(),
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteReward {
                state: idx / num_actions,
                action: idx % num_actions,
            });
        }
        Ok(Self { num_actions, values })
    }

    /// A reward that depends on the state only: every action of state `s`
    /// receives `per_state[s]`.
    pub fn state_based(num_actions: usize, per_state: &[f64]) -> Result<Self, ModelError> {
        let values = per_state
            .iter()
            .flat_map(|&v| std::iter::repeat(v).take(num_actions))
            .collect();
        Self::new(per_state.len(), num_actions, values)
    }

    pub fn zeros(domain: &Domain) -> Self {
        Self {
            num_actions: domain.num_actions(),
            values: vec![0.0; domain.num_pairs()],
        }
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions.max(1)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_state_based(&self) -> bool {
        self.values
            .chunks(self.num_actions)
            .all(|row| row.iter().all(|&v| v == row[0]))
    }

    /// Per-state values, or the first state whose actions disagree.
    pub fn per_state(&self) -> Result<Vec<f64>, ModelError> {
        self.values
            .chunks(self.num_actions)
            .enumerate()
            .map(|(s, row)| {
                if row.iter().all(|&v| v == row[0]) {
                    Ok(row[0])
                } else {
                    Err(ModelError::NotStateBased(s))
                }
            })
            .collect()
    }

    pub fn ensure_matches(&self, domain: &Domain) -> Result<(), ModelError> {
        if self.num_actions != domain.num_actions() || self.values.len() != domain.num_pairs() {
            return Err(ModelError::RewardShape {
                expected: domain.num_pairs(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    /// Positive affine transform `scale * r + shift`, used by invariance tests.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        Self {
            num_actions: self.num_actions,
            values: self.values.iter().map(|v| scale * v + shift).collect(),
        }
    }
}

/// A deterministic or stochastic stationary policy.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Deterministic(Vec<usize>),
    /// `rows[s][a]` is the probability of taking `a` in `s`.
    Stochastic(Vec<Vec<f64>>),
}

impl Policy {
    pub fn num_states(&self) -> usize {
        match self {
            Policy::Deterministic(c) => c.len(),
            Policy::Stochastic(rows) => rows.len(),
        }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic(c) => {
                if c[s] == a {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Stochastic(rows) => rows[s][a],
        }
    }

    /// Most likely action in `s`, lowest index on ties.
    pub fn action(&self, s: usize) -> usize {
        match self {
            Policy::Deterministic(c) => c[s],
            Policy::Stochastic(rows) => {
                let mut best = 0;
                for (a, &p) in rows[s].iter().enumerate() {
                    if p > rows[s][best] {
                        best = a;
                    }
                }
                best
            }
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<(), ModelError> {
        let ns = domain.num_states();
        if self.num_states() != ns {
            return Err(ModelError::PolicyShape {
                expected: ns,
                got: self.num_states(),
            });
        }
        match self {
            Policy::Deterministic(c) => {
                if let Some(s) = c.iter().position(|&a| a >= domain.num_actions()) {
                    return Err(ModelError::PolicyRow {
                        state: s,
                        reason: format!("action index {} out of range", c[s]),
                    });
                }
            }
            Policy::Stochastic(rows) => {
                for (s, row) in rows.iter().enumerate() {
                    if row.len() != domain.num_actions() {
                        return Err(ModelError::PolicyRow {
                            state: s,
                            reason: format!("{} probabilities for {} actions", row.len(), domain.num_actions()),
                        });
                    }
                    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        return Err(ModelError::PolicyRow {
                            state: s,
                            reason: "negative or non-finite probability".into(),
                        });
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                        return Err(ModelError::PolicyRow {
                            state: s,
                            reason: format!("probabilities sum to {sum}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Discounted state-action visitation frequencies from the start state.
///
/// Entries are nonnegative and sum to `1 / (1 - gamma)`; the start state's
/// marginal is always at least one.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyVector {
    num_actions: usize,
    values: Vec<f64>,
}

impl OccupancyVector {
    /// Wraps raw frequencies, clamping round-off negatives to zero.
    pub fn from_values(num_actions: usize, mut values: Vec<f64>) -> Self {
        for v in &mut values {
            if *v < 0.0 && *v >= NEGATIVE_CLAMP {
                *v = 0.0;
            }
        }
        Self { num_actions, values }
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    /// State marginal `x(s) = sum_a x(s, a)`.
    pub fn state(&self, s: usize) -> f64 {
        self.values[s * self.num_actions..(s + 1) * self.num_actions]
            .iter()
            .sum()
    }

    pub fn state_marginals(&self) -> Vec<f64> {
        self.values.chunks(self.num_actions).map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sum x(s,a) r(s,a)`, the value at the start state.
    pub fn value(&self, reward: &RewardFunction) -> f64 {
        self.values.iter().zip(reward.values()).map(|(x, r)| x * r).sum()
    }

    /// Largest absolute violation of the flow equations under `domain`.
    pub fn flow_residual(&self, domain: &Domain) -> f64 {
        let mut inflow = vec![0.0; domain.num_states()];
        inflow[domain.start()] = 1.0;
        for (s, a, next, p) in domain.transition_entries() {
            inflow[next] += domain.gamma() * self.get(s, a) * p;
        }
        (0..domain.num_states())
            .map(|s| (self.state(s) - inflow[s]).abs())
            .fold(0.0, f64::max)
    }

    /// Deviation of the total mass from `1 / (1 - gamma)`.
    pub fn mass_residual(&self, gamma: f64) -> f64 {
        (self.total() - 1.0 / (1.0 - gamma)).abs()
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks every occupancy invariant at tolerance `tol`.
    pub fn satisfies_invariants(&self, domain: &Domain, tol: f64) -> bool {
        self.values.len() == domain.num_pairs()
            && self.min_entry() >= NEGATIVE_CLAMP
            && self.mass_residual(domain.gamma()) <= tol
            && self.flow_residual(domain) <= tol
            && self.state(domain.start()) >= 1.0 - tol
    }
}

/// Occupancy of `policy` in `domain` by a direct solve of
/// `(I - gamma P_pi^T) y = e_start`, then `x(s, a) = y(s) pi(a | s)`.
pub fn occupancy_of_policy(domain: &Domain, policy: &Policy) -> Result<OccupancyVector, ModelError> {
    policy.validate(domain)?;
    let (ns, na) = (domain.num_states(), domain.num_actions());
    let gamma = domain.gamma();

    let mut system = DMatrix::<f64>::identity(ns, ns);
    for s in 0..ns {
        for a in 0..na {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            for &(next, p) in domain.successors(s, a) {
                system[(next, s)] -= gamma * pa * p;
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(ns);
    rhs[domain.start()] = 1.0;

    let y = system
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(ModelError::FlowResidual(f64::INFINITY))?;
    let residual = (&system * &y - &rhs).amax();
    if !residual.is_finite() || residual > 1e-6 {
        return Err(ModelError::FlowResidual(residual));
    }

    let mut values = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            values[s * na + a] = y[s] * policy.prob(s, a);
        }
    }
    Ok(OccupancyVector::from_values(na, values))
}

/// Value of `policy` at the start state, `sum x^pi(s,a) r(s,a)`.
pub fn evaluate_policy(domain: &Domain, reward: &RewardFunction, policy: &Policy) -> Result<f64, ModelError> {
    reward.ensure_matches(domain)?;
    Ok(occupancy_of_policy(domain, policy)?.value(reward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::fixtures;

    #[test]
    fn single_state_occupancy_is_geometric_series() {
        let single = fixtures::single();
        let occ = occupancy_of_policy(&single.robot_domain, &Policy::Deterministic(vec![0])).unwrap();
        assert!((occ.get(0, 0) - 10.0).abs() < 1e-12);
        let v = evaluate_policy(&single.robot_domain, &single.reward, &Policy::Deterministic(vec![0])).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn switch_human_occupancy_for_b1() {
        let sw = fixtures::switch();
        let d = &sw.human_domain;
        let (s0, safe, unsafe_) = (0, 1, 2);
        let occ = occupancy_of_policy(d, &Policy::Deterministic(vec![0, 0, 0])).unwrap();
        assert!((occ.state(s0) - 1.0).abs() < 1e-12);
        assert!((occ.state(safe) - 9.0).abs() < 1e-12);
        assert_eq!(occ.state(unsafe_), 0.0);
        assert!(occ.satisfies_invariants(d, 1e-7));

        let v_b1 = evaluate_policy(d, &sw.reward, &Policy::Deterministic(vec![0, 0, 0])).unwrap();
        let v_b2 = evaluate_policy(d, &sw.reward, &Policy::Deterministic(vec![1, 0, 0])).unwrap();
        assert!((v_b1 - 9.0).abs() < 1e-12);
        assert_eq!(v_b2, 0.0);
    }

    #[test]
    fn deterministic_policy_puts_no_mass_on_other_actions() {
        let sw = fixtures::switch();
        let occ = occupancy_of_policy(&sw.robot_domain, &Policy::Deterministic(vec![1, 0, 1])).unwrap();
        assert_eq!(occ.get(0, 0), 0.0);
        assert_eq!(occ.get(2, 0), 0.0);
    }

    #[test]
    fn rejects_bad_domains() {
        let names = |n: usize| (0..n).map(|i| format!("s{i}")).collect::<Vec<_>>();
        let acts = vec!["a".to_string()];
        assert_eq!(
            Domain::new(names(1), acts.clone(), 1.0, 0, [(0, 0, 0, 1.0)]).unwrap_err(),
            ModelError::Discount(1.0)
        );
        assert_eq!(
            Domain::new(names(1), acts.clone(), 0.9, 3, [(0, 0, 0, 1.0)]).unwrap_err(),
            ModelError::Start(3)
        );
        let err = Domain::new(names(2), acts.clone(), 0.9, 0, [(0, 0, 1, 0.9), (1, 0, 1, 1.0)]).unwrap_err();
        assert!(matches!(err, ModelError::NotStochastic { ref state, .. } if state == "s0"));
        let err = Domain::new(names(1), acts, 0.9, 0, [(0, 0, 0, 1.5), (0, 0, 0, -0.5)]).unwrap_err();
        assert!(matches!(err, ModelError::Probability { .. }));
    }

    #[test]
    fn duplicate_triples_are_merged() {
        let d = Domain::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            0.5,
            0,
            [(0, 0, 1, 0.25), (0, 0, 1, 0.25), (0, 0, 0, 0.5), (1, 0, 1, 1.0)],
        )
        .unwrap();
        assert_eq!(d.successors(0, 0), &[(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn state_based_reward_round_trip() {
        let r = RewardFunction::state_based(2, &[1.0, -2.0]).unwrap();
        assert!(r.is_state_based());
        assert_eq!(r.per_state().unwrap(), vec![1.0, -2.0]);
        let r = RewardFunction::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.per_state().unwrap_err(), ModelError::NotStateBased(0));
        assert!(RewardFunction::new(1, 2, vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn stochastic_rows_must_sum_to_one() {
        let sw = fixtures::switch();
        let bad = Policy::Stochastic(vec![vec![0.5, 0.4], vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(
            occupancy_of_policy(&sw.human_domain, &bad),
            Err(ModelError::PolicyRow { state: 0, .. })
        ));
    }
}
