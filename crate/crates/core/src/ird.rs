//! Proxy-reward baseline.
//!
//! Rewards every candidate goal state highly, penalizes every candidate
//! forbidden state, optimizes that proxy in the agent's model and counts the
//! ground-truth elements the resulting policy breaks.

use std::time::Instant;

use thiserror::Error;

use crate::benchmarks::BenchmarkInstance;
use crate::expectation::{violated_elements, ExpectationElement};
use crate::formulation::{extract_policy, solve_optimal, FormulationError, FormulationParams, SupersetResult};
use crate::mdp::{occupancy_of_policy, ModelError, OccupancyVector, Policy, RewardFunction, TOLERANCES};

pub const DEFAULT_REWARD_HIGH: f64 = 10.0;
pub const DEFAULT_REWARD_LOW: f64 = -10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrdError {
    #[error("proxy rewards need high > 0 > low, got high {high} and low {low}")]
    Magnitudes { high: f64, low: f64 },
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    pub policy: Policy,
    /// Occupancy of `policy`, recomputed by a direct solve.
    pub occupancy: OccupancyVector,
    pub violated_elements: Vec<ExpectationElement>,
    /// Time spent building and solving the proxy problem.
    pub solve_time_ms: f64,
}

/// State-based proxy: `high` on goal candidates, `low` on forbidden
/// candidates (taking precedence on overlap), zero elsewhere.
pub fn proxy_reward(
    num_states: usize,
    num_actions: usize,
    supersets: &SupersetResult,
    high: f64,
    low: f64,
) -> RewardFunction {
    let mut per_state = vec![0.0; num_states];
    for &s in &supersets.goal_candidates {
        per_state[s] = high;
    }
    for &s in &supersets.forbidden_candidates {
        per_state[s] = low;
    }
    RewardFunction::state_based(num_actions, &per_state).expect("finite proxy")
}

pub fn run_ird(
    instance: &BenchmarkInstance,
    supersets: &SupersetResult,
    reward_high: f64,
    reward_low: f64,
) -> Result<BaselineOutcome, IrdError> {
    if !(reward_high > 0.0 && reward_low < 0.0) {
        return Err(IrdError::Magnitudes {
            high: reward_high,
            low: reward_low,
        });
    }
    let robot = &instance.robot_domain;
    let clock = Instant::now();
    let proxy = proxy_reward(
        robot.num_states(),
        robot.num_actions(),
        supersets,
        reward_high,
        reward_low,
    );
    let solved = solve_optimal(robot, &proxy)?;
    let solve_time_ms = clock.elapsed().as_secs_f64() * 1e3;

    let policy = extract_policy(&solved.occupancy, FormulationParams::default().d_threshold);
    let occupancy = occupancy_of_policy(robot, &policy)?;
    let violated = violated_elements(&occupancy, &instance.ground_truth, TOLERANCES.expectation)
        .into_iter()
        .cloned()
        .collect();
    Ok(BaselineOutcome {
        policy,
        occupancy,
        violated_elements: violated,
        solve_time_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::fixtures;
    use crate::expectation::PlanningFunction;
    use crate::formulation::compute_supersets;

    fn supersets(inst: &BenchmarkInstance) -> SupersetResult {
        compute_supersets(
            &inst.human_domain,
            &inst.reward,
            PlanningFunction::OptimalSet,
            &FormulationParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn switch_has_no_violations() {
        let sw = fixtures::switch();
        let out = run_ird(&sw, &supersets(&sw), 10.0, -10.0).unwrap();
        assert!(out.violated_elements.is_empty());
        assert_eq!(out.policy.action(0), 1);
    }

    #[test]
    fn corridor_stalls_before_the_penalized_route() {
        let c = fixtures::corridor();
        let out = run_ird(&c, &supersets(&c), 10.0, -10.0).unwrap();
        assert_eq!(out.violated_elements.len(), 1);
        assert_eq!(out.occupancy.state(3), 0.0);
    }

    #[test]
    fn identical_models_never_violate() {
        let mut sw = fixtures::switch();
        sw.robot_domain = sw.human_domain.clone();
        let out = run_ird(&sw, &supersets(&sw), 10.0, -10.0).unwrap();
        assert!(out.violated_elements.is_empty());
    }

    #[test]
    fn magnitudes_are_checked() {
        let sw = fixtures::switch();
        assert!(matches!(
            run_ird(&sw, &supersets(&sw), -1.0, -10.0),
            Err(IrdError::Magnitudes { .. })
        ));
    }
}
