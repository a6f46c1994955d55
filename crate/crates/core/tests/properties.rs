mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{occupancy_residuals, random_bounded_lp, vertex_enumeration};
use expalign::benchmarks::{random_instance, random_mdp};
use expalign::formulation::{compute_supersets, solve_optimal};
use expalign::mdp::occupancy_of_policy;
use expalign::oracle::bellman_evaluate;
use expalign::query::{run_to_completion, GroundTruthOracle};
use expalign::simplex::{solve, solve_with, LpStatus, PivotRule, SolverOptions};
use expalign::{Domain, ExpectationSet, FormulationParams, PlanningFunction, Policy, RewardFunction, SessionStatus};

fn mdp() -> impl Strategy<Value = (Domain, RewardFunction)> {
    (1usize..=6, 1usize..=3, 0.5f64..0.97, any::<u64>()).prop_map(|(n, a, gamma, seed)| {
        let m = random_mdp(n, a, gamma, seed);
        (m.domain, m.reward)
    })
}

fn random_policy(domain: &Domain, choices: &[usize]) -> Policy {
    Policy::Deterministic(
        (0..domain.num_states())
            .map(|s| choices[s % choices.len()] % domain.num_actions())
            .collect(),
    )
}

/// `domain` with state `s` renamed to `perm[s]`.
fn permuted(domain: &Domain, perm: &[usize]) -> Domain {
    let mut names = vec![String::new(); perm.len()];
    for (s, &p) in perm.iter().enumerate() {
        names[p] = domain.state_name(s).to_string();
    }
    let triples: Vec<_> = domain
        .transition_entries()
        .map(|(s, a, n, p)| (perm[s], a, perm[n], p))
        .collect();
    Domain::new(
        names,
        domain.actions().to_vec(),
        domain.gamma(),
        perm[domain.start()],
        triples,
    )
    .unwrap()
}

fn permuted_reward(reward: &RewardFunction, perm: &[usize]) -> RewardFunction {
    let na = reward.num_actions();
    let mut values = vec![0.0; reward.values().len()];
    for (s, &p) in perm.iter().enumerate() {
        for a in 0..na {
            values[p * na + a] = reward.get(s, a);
        }
    }
    RewardFunction::new(perm.len(), na, values).unwrap()
}

fn image(set: &BTreeSet<usize>, perm: &[usize]) -> BTreeSet<usize> {
    set.iter().map(|&s| perm[s]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn policy_occupancy_has_unit_flow((domain, _) in mdp(), choices in prop::collection::vec(0usize..3, 6)) {
        let occ = occupancy_of_policy(&domain, &random_policy(&domain, &choices)).unwrap();
        let (mass, flow) = occupancy_residuals(&occ, &domain);
        prop_assert!(mass <= 1e-7 * (1.0 / (1.0 - domain.gamma())), "mass {mass}");
        prop_assert!(flow <= 1e-7, "flow {flow}");
        prop_assert!(occ.state(domain.start()) >= 1.0 - 1e-9);
    }

    #[test]
    fn lp_value_matches_bellman_evaluation((domain, reward) in mdp()) {
        let opt = solve_optimal(&domain, &reward).unwrap();
        prop_assert!(opt.occupancy.satisfies_invariants(&domain, 1e-7));
        let v = bellman_evaluate(&domain, &reward, &opt.policy, 1e-13);
        prop_assert!((v[domain.start()] - opt.value).abs() <= 1e-7 * opt.value.abs().max(1.0));
        let direct = occupancy_of_policy(&domain, &opt.policy).unwrap().value(&reward);
        prop_assert!((direct - opt.value).abs() <= 1e-7 * opt.value.abs().max(1.0));
    }

    #[test]
    fn supersets_ignore_positive_affine_rewards(
        (domain, reward) in mdp(),
        scale in prop::sample::select(vec![0.5, 2.0, 4.0]),
        shift in prop::sample::select(vec![-1.0, 0.0, 3.0]),
    ) {
        let params = FormulationParams::default();
        let base = compute_supersets(&domain, &reward, PlanningFunction::OptimalSet, &params).unwrap();
        let moved = compute_supersets(&domain, &reward.affine(scale, shift), PlanningFunction::OptimalSet, &params).unwrap();
        prop_assert_eq!(base.forbidden_candidates, moved.forbidden_candidates);
        prop_assert_eq!(base.goal_candidates, moved.goal_candidates);
    }

    #[test]
    fn supersets_follow_state_relabeling((domain, reward) in mdp(), key in any::<u64>()) {
        let n = domain.num_states();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut k = key;
        for i in (1..n).rev() {
            perm.swap(i, (k % (i as u64 + 1)) as usize);
            k /= i as u64 + 1;
        }
        let params = FormulationParams::default();
        let base = compute_supersets(&domain, &reward, PlanningFunction::OptimalSet, &params).unwrap();
        let moved = compute_supersets(
            &permuted(&domain, &perm),
            &permuted_reward(&reward, &perm),
            PlanningFunction::OptimalSet,
            &params,
        )
        .unwrap();
        prop_assert_eq!(image(&base.forbidden_candidates, &perm), moved.forbidden_candidates);
        prop_assert_eq!(image(&base.goal_candidates, &perm), moved.goal_candidates);
    }

    #[test]
    fn supersets_do_not_depend_on_alpha((domain, reward) in mdp(), alpha in prop::sample::select(vec![0.25, 1.0, 5.0])) {
        let base = compute_supersets(&domain, &reward, PlanningFunction::OptimalSet, &FormulationParams::default()).unwrap();
        let params = FormulationParams { alpha, ..Default::default() };
        let other = compute_supersets(&domain, &reward, PlanningFunction::OptimalSet, &params).unwrap();
        prop_assert_eq!(base.forbidden_candidates, other.forbidden_candidates);
        prop_assert_eq!(base.goal_candidates, other.goal_candidates);
    }

    #[test]
    fn optimal_supersets_are_disjoint_and_hold_the_start((domain, reward) in mdp()) {
        let sup = compute_supersets(&domain, &reward, PlanningFunction::OptimalSet, &FormulationParams::default()).unwrap();
        prop_assert!(sup.forbidden_candidates.is_disjoint(&sup.goal_candidates));
        prop_assert!(sup.goal_candidates.contains(&domain.start()));
    }

    #[test]
    fn simplex_matches_vertex_enumeration(seed in any::<u64>()) {
        let lp = random_bounded_lp(seed);
        let (status, best) = vertex_enumeration(&lp);
        for rule in [PivotRule::Bland, PivotRule::Dantzig] {
            let got = solve_with(&lp, &SolverOptions { rule, ..Default::default() }).unwrap();
            prop_assert_eq!(got.status, status);
            if let (Some(want), Some(z), Some(x)) = (best, got.objective_value, got.point.as_ref()) {
                prop_assert!((want - z).abs() <= 1e-7, "{want} vs {z}");
                prop_assert!(lp.max_scaled_residual(x) <= 1e-8);
                prop_assert!(x.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn query_loop_terminates_within_state_budget(
        seed in any::<u64>(),
        n in 2usize..=6,
        avoid_mask in any::<u8>(),
        visit_mask in any::<u8>(),
    ) {
        let mut inst = random_instance(n, 2, 0.9, seed);
        let avoid: Vec<usize> = (1..n).filter(|s| avoid_mask >> s & 1 == 1).collect();
        let visit: Vec<usize> = (1..n).filter(|s| visit_mask >> s & 1 == 1 && !avoid.contains(s)).collect();
        inst.ground_truth = ExpectationSet::from_sets(avoid, visit);
        let mut oracle = GroundTruthOracle::new(&inst.ground_truth);
        let session = run_to_completion(
            &inst.human_domain,
            &inst.reward,
            &inst.robot_domain,
            &mut oracle,
            PlanningFunction::OptimalSet,
            FormulationParams::default(),
        )
        .unwrap();
        prop_assert!(session.status().is_terminal());
        prop_assert!(session.num_queries() <= n);
        if let SessionStatus::Solved { occupancy, policy } = session.status() {
            prop_assert!(occupancy.satisfies_invariants(&inst.robot_domain, 1e-7));
            let direct = occupancy_of_policy(&inst.robot_domain, policy).unwrap();
            for &s in session.confirmed_forbidden() {
                prop_assert!(direct.state(s) <= 1e-7);
            }
        }
    }
}

#[test]
fn solver_is_deterministic() {
    for seed in 0..10 {
        let lp = random_bounded_lp(seed);
        assert_eq!(solve(&lp).unwrap(), solve(&lp).unwrap());
    }
    let (status, _) = vertex_enumeration(&random_bounded_lp(3));
    assert!(matches!(status, LpStatus::Optimal | LpStatus::Infeasible));
}
