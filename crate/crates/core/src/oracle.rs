//! Enumeration and dynamic-programming oracles for small instances.
//!
//! Nothing here touches the LP path: policies are enumerated and evaluated
//! by direct linear solves or by iterating the Bellman operator. Tests use
//! these routines to check the LP formulations.

use thiserror::Error;

use crate::mdp::{occupancy_of_policy, Domain, ModelError, OccupancyVector, Policy, RewardFunction, TOLERANCES};

/// Upper bound on the number of deterministic policies enumerated.
pub const MAX_ENUMERATED_POLICIES: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance has {0} deterministic policies, more than the enumeration limit")]
    TooLarge(u128),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A deterministic policy together with its occupancy and start value.
#[derive(Clone, Debug)]
pub struct EvaluatedPolicy {
    pub policy: Policy,
    pub occupancy: OccupancyVector,
    pub value: f64,
}

/// Every deterministic policy of `domain`, evaluated under `reward`.
pub fn enumerate_policies(domain: &Domain, reward: &RewardFunction) -> Result<Vec<EvaluatedPolicy>, OracleError> {
    reward.ensure_matches(domain)?;
    let (ns, na) = (domain.num_states(), domain.num_actions());
    let count = (na as u128).checked_pow(ns as u32).unwrap_or(u128::MAX);
    if count > MAX_ENUMERATED_POLICIES {
        return Err(OracleError::TooLarge(count));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut choice = vec![0usize; ns];
    loop {
        let policy = Policy::Deterministic(choice.clone());
        let occupancy = occupancy_of_policy(domain, &policy)?;
        let value = occupancy.value(reward);
        out.push(EvaluatedPolicy {
            policy,
            occupancy,
            value,
        });
        // odometer increment
        let mut i = 0;
        loop {
            if i == ns {
                return Ok(out);
            }
            choice[i] += 1;
            if choice[i] < na {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Best value and all deterministic policies within `tol` of it.
#[derive(Clone, Debug)]
pub struct OptimalPolicies {
    pub value: f64,
    pub policies: Vec<EvaluatedPolicy>,
}

/// All optimal deterministic policies by exhaustive enumeration.
///
/// `tol` defaults to `1e-8 * max(1, |V*|)`.
pub fn brute_force_optimal_set(
    domain: &Domain,
    reward: &RewardFunction,
    tol: Option<f64>,
) -> Result<OptimalPolicies, OracleError> {
    let all = enumerate_policies(domain, reward)?;
    let best = all.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    let tol = tol.unwrap_or(TOLERANCES.optimality_rel * best.abs().max(1.0));
    let policies = all.into_iter().filter(|p| p.value >= best - tol).collect();
    Ok(OptimalPolicies { value: best, policies })
}

/// Visit sets derived from the optimal policies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VisitSets {
    /// States with zero occupancy under every optimal policy.
    pub never_visited: Vec<usize>,
    /// States with positive occupancy under every optimal policy.
    pub always_visited: Vec<usize>,
}

/// Classifies each state by its occupancy across `optimal`, treating
/// occupancy at or below `zero_tol` as unvisited.
pub fn visit_sets(optimal: &OptimalPolicies, num_states: usize, zero_tol: f64) -> VisitSets {
    let mut never = Vec::new();
    let mut always = Vec::new();
    for s in 0..num_states {
        let visits = optimal.policies.iter().map(|p| p.occupancy.state(s) > zero_tol);
        let (mut any, mut all) = (false, true);
        for v in visits {
            any |= v;
            all &= v;
        }
        if !any {
            never.push(s);
        }
        if all {
            always.push(s);
        }
    }
    VisitSets {
        never_visited: never,
        always_visited: always,
    }
}

/// Optimal state values by value iteration, stopped when the sup-norm update
/// drops below `tol`.
pub fn value_iteration(domain: &Domain, reward: &RewardFunction, tol: f64) -> Vec<f64> {
    let (ns, na) = (domain.num_states(), domain.num_actions());
    let mut v = vec![0.0; ns];
    loop {
        let mut delta: f64 = 0.0;
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| q_value(domain, reward, &v, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        for (old, new) in v.iter().zip(&next) {
            delta = delta.max((old - new).abs());
        }
        v = next;
        if delta * domain.gamma() / (1.0 - domain.gamma()).max(1e-12) < tol {
            return v;
        }
    }
}

/// `r(s, a) + gamma * sum_s' T(s, a, s') v(s')`.
pub fn q_value(domain: &Domain, reward: &RewardFunction, v: &[f64], s: usize, a: usize) -> f64 {
    reward.get(s, a) + domain.gamma() * domain.successors(s, a).iter().map(|&(n, p)| p * v[n]).sum::<f64>()
}

/// Iterative Bellman evaluation of a (possibly stochastic) policy.
pub fn bellman_evaluate(domain: &Domain, reward: &RewardFunction, policy: &Policy, tol: f64) -> Vec<f64> {
    let (ns, na) = (domain.num_states(), domain.num_actions());
    let mut v = vec![0.0; ns];
    loop {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| {
                        let p = policy.prob(s, a);
                        if p == 0.0 {
                            0.0
                        } else {
                            p * q_value(domain, reward, &v, s, a)
                        }
                    })
                    .sum()
            })
            .collect();
        let delta = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta * domain.gamma() / (1.0 - domain.gamma()).max(1e-12) < tol {
            return v;
        }
    }
}
