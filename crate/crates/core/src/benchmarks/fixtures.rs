//! Hand-sized instances with known answers.

use super::BenchmarkInstance;
use crate::expectation::ExpectationSet;
use crate::mdp::{Domain, RewardFunction};

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// One state with a single self-loop, reward 1, discount 0.9.
pub fn single() -> BenchmarkInstance {
    let d = Domain::new(strings(&["s0"]), strings(&["stay"]), 0.9, 0, [(0, 0, 0, 1.0)]).unwrap();
    BenchmarkInstance {
        name: "single".into(),
        seed: 0,
        robot_domain: d.clone(),
        human_domain: d,
        reward: RewardFunction::state_based(1, &[1.0]).unwrap(),
        ground_truth: ExpectationSet::default(),
        layout: None,
    }
}

/// Two buttons whose effects are swapped in the agent's model.
///
/// States `s0, sSafe, sUnsafe`; actions `b1, b2`. The user believes `b1`
/// leads to `sSafe`; in truth `b2` does. Both outcomes are absorbing and
/// only `sSafe` is rewarded.
pub fn switch() -> BenchmarkInstance {
    let states = strings(&["s0", "sSafe", "sUnsafe"]);
    let actions = strings(&["b1", "b2"]);
    let terminals = [(1, 0, 1, 1.0), (1, 1, 1, 1.0), (2, 0, 2, 1.0), (2, 1, 2, 1.0)];
    let human = Domain::new(
        states.clone(),
        actions.clone(),
        0.9,
        0,
        [(0, 0, 1, 1.0), (0, 1, 2, 1.0)].into_iter().chain(terminals),
    )
    .unwrap();
    let robot = Domain::new(
        states,
        actions,
        0.9,
        0,
        [(0, 0, 2, 1.0), (0, 1, 1, 1.0)].into_iter().chain(terminals),
    )
    .unwrap();
    BenchmarkInstance {
        name: "switch".into(),
        seed: 0,
        robot_domain: robot,
        human_domain: human,
        reward: RewardFunction::state_based(2, &[0.0, 1.0, 0.0]).unwrap(),
        ground_truth: ExpectationSet::from_sets([2], [1]),
        layout: None,
    }
}

/// Two routes to an absorbing goal, each open in only one model.
///
/// States `s0, W, A, g`; actions `goW, goA, advance`. The user believes
/// `s0 -goA-> A -advance-> g` with `goW` blocked; the agent can only take
/// `s0 -goW-> W -advance-> g`. Blocked moves and unused actions stay put.
pub fn corridor() -> BenchmarkInstance {
    let states = strings(&["s0", "W", "A", "g"]);
    let actions = strings(&["goW", "goA", "advance"]);
    let (s0, w, a, g) = (0, 1, 2, 3);
    let (go_w, go_a, adv) = (0, 1, 2);
    let mut shared = vec![
        (s0, adv, s0, 1.0),
        (w, go_w, w, 1.0),
        (w, go_a, w, 1.0),
        (w, adv, g, 1.0),
        (a, go_w, a, 1.0),
        (a, go_a, a, 1.0),
        (a, adv, g, 1.0),
    ];
    shared.extend((0..3).map(|act| (g, act, g, 1.0)));
    let human = Domain::new(
        states.clone(),
        actions.clone(),
        0.9,
        s0,
        shared.iter().copied().chain([(s0, go_w, s0, 1.0), (s0, go_a, a, 1.0)]),
    )
    .unwrap();
    let robot = Domain::new(
        states,
        actions,
        0.9,
        s0,
        shared.iter().copied().chain([(s0, go_w, w, 1.0), (s0, go_a, s0, 1.0)]),
    )
    .unwrap();
    BenchmarkInstance {
        name: "corridor".into(),
        seed: 0,
        robot_domain: robot,
        human_domain: human,
        reward: RewardFunction::state_based(3, &[0.0, 0.0, 0.0, 1.0]).unwrap(),
        ground_truth: ExpectationSet::from_sets([], [g]),
        layout: None,
    }
}

/// All fixtures by name.
pub fn all() -> Vec<BenchmarkInstance> {
    vec![single(), switch(), corridor()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{is_human_sufficient, FormulationParams};

    #[test]
    fn fixtures_are_valid_and_human_sufficient() {
        for f in all() {
            f.validate().unwrap();
            assert!(
                is_human_sufficient(
                    &f.human_domain,
                    &f.reward,
                    &f.ground_truth,
                    &FormulationParams::default()
                )
                .unwrap(),
                "{}",
                f.name
            );
        }
    }
}
