//! Exit-gate checks. Each test prints one PASS/FAIL line and then asserts.

mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use common::{occupancy_residuals, random_bounded_lp, report, vertex_enumeration};
use expalign::benchmarks::{self, fixtures, random_instance, random_mdp, table1_cells, TABLE1_SEEDS};
use expalign::formulation::{compute_supersets, is_human_sufficient, is_misspecified, solve_optimal};
use expalign::harness::{run_align, run_ird_record, RunRecord};
use expalign::ird::{run_ird, DEFAULT_REWARD_HIGH, DEFAULT_REWARD_LOW};
use expalign::mdp::{occupancy_of_policy, Policy};
use expalign::oracle::{bellman_evaluate, brute_force_optimal_set, enumerate_policies, visit_sets};
use expalign::simplex::{solve, solve_with, LpProblem, LpStatus, PivotRule, Relation, SolverOptions};
use expalign::{
    BenchmarkInstance, Domain, ExpectationSet, Family, FormulationParams, OccupancyVector, PlanningFunction,
    QuerySession, RewardFunction, SessionStatus,
};

const CORPUS_SIZE: u64 = 100;
const OCC_TOL: f64 = 1e-6;
const INVARIANT_TOL: f64 = 1e-7;

fn corpus() -> Vec<(Domain, RewardFunction)> {
    (0..CORPUS_SIZE)
        .map(|seed| {
            let n = 2 + (seed as usize % 5);
            let m = random_mdp(n, 2, 0.9, 1000 + seed);
            (m.domain, m.reward)
        })
        .collect()
}

struct SuiteRun {
    instance: BenchmarkInstance,
    align: RunRecord,
    ird: RunRecord,
    occupancies: Vec<OccupancyVector>,
}

fn suite() -> &'static Vec<SuiteRun> {
    static SUITE: OnceLock<Vec<SuiteRun>> = OnceLock::new();
    SUITE.get_or_init(|| {
        let jobs: Vec<(Family, usize, usize, u64)> = table1_cells()
            .into_iter()
            .flat_map(|(f, w, h)| TABLE1_SEEDS.iter().map(move |&s| (f, w, h, s)))
            .collect();
        jobs.par_iter()
            .map(|&(family, w, h, seed)| {
                let instance = benchmarks::generate(family, w, h, seed)
                    .unwrap_or_else(|e| panic!("{family} {w}x{h} seed {seed}: {e}"));
                let params = FormulationParams::default();
                let run = run_align(&instance, PlanningFunction::OptimalSet, params).unwrap();
                let ird = run_ird_record(
                    &instance,
                    PlanningFunction::OptimalSet,
                    params,
                    DEFAULT_REWARD_HIGH,
                    DEFAULT_REWARD_LOW,
                )
                .unwrap();
                let mut occupancies = Vec::new();
                if let SessionStatus::Solved { policy, occupancy } = run.session.status() {
                    occupancies.push(occupancy.clone());
                    occupancies.push(occupancy_of_policy(&instance.robot_domain, policy).unwrap());
                }
                SuiteRun {
                    instance,
                    align: run.record,
                    ird,
                    occupancies,
                }
            })
            .collect()
    })
}

type Cell<'a> = ((String, usize, usize), Vec<&'a SuiteRun>);

fn cells(runs: &[SuiteRun]) -> Vec<Cell<'_>> {
    let mut out: Vec<Cell<'_>> = Vec::new();
    for r in runs {
        let key = (r.align.family.clone(), r.align.width, r.align.height);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => out.push((key, vec![r])),
        }
    }
    out
}

#[test]
fn criterion_01_superset_oracle_equivalence() {
    let clock = Instant::now();
    let params = FormulationParams::default();
    let mut mismatches = Vec::new();
    for (i, (domain, reward)) in corpus().iter().enumerate() {
        let lp = compute_supersets(domain, reward, PlanningFunction::OptimalSet, &params).unwrap();
        let brute = brute_force_optimal_set(domain, reward, None).unwrap();
        let sets = visit_sets(&brute, domain.num_states(), OCC_TOL);
        let never: BTreeSet<usize> = sets.never_visited.into_iter().collect();
        let always: BTreeSet<usize> = sets.always_visited.into_iter().collect();
        let value_ok = (lp.optimal_value - brute.value).abs() <= OCC_TOL * brute.value.abs().max(1.0);
        if lp.forbidden_candidates != never || lp.goal_candidates != always || !value_ok {
            mismatches.push(i);
        }
    }
    let elapsed = clock.elapsed();
    let ok = mismatches.is_empty() && elapsed < Duration::from_secs(60);
    report(
        1,
        ok,
        &format!(
            "superset membership agrees with enumeration on {}/{CORPUS_SIZE} random MDPs in {:.2?} (mismatches {mismatches:?})",
            CORPUS_SIZE as usize - mismatches.len(),
            elapsed
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_02_zero_violation_guarantee() {
    let runs = suite();
    let unsolved: Vec<&str> = runs
        .iter()
        .filter(|r| !r.align.solved)
        .map(|r| r.instance.name.as_str())
        .collect();
    let violating: Vec<&str> = runs
        .iter()
        .filter(|r| r.align.solved && r.align.violations > 0)
        .map(|r| r.instance.name.as_str())
        .collect();
    let ok = runs.len() == 100 && unsolved.is_empty() && violating.is_empty();
    report(
        2,
        ok,
        &format!(
            "{} align runs, {} solved, violating {violating:?}, unsolved {unsolved:?}",
            runs.len(),
            runs.len() - unsolved.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_03_query_economy() {
    let runs = suite();
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for ((family, w, h), group) in cells(runs) {
        let mean_q = group.iter().map(|r| r.align.queries.unwrap() as f64).sum::<f64>() / group.len() as f64;
        let mean_s = group.iter().map(|r| r.instance.num_states() as f64).sum::<f64>() / group.len() as f64;
        worst_ratio = worst_ratio.max(mean_q / mean_s);
        if mean_q > 0.25 * mean_s {
            failures.push(format!("{family} {w}x{h}: mean {mean_q:.2} > 0.25*{mean_s:.1}"));
        }
        if family == "walkway" && (w, h) == (4, 4) && mean_q > 8.0 {
            failures.push(format!("walkway 4x4 mean {mean_q:.2} > 8"));
        }
    }
    for r in runs {
        if r.align.queries.unwrap() > r.instance.num_states() {
            failures.push(format!(
                "{}: {} queries > |S|",
                r.instance.name,
                r.align.queries.unwrap()
            ));
        }
    }
    let walkway4: Vec<usize> = runs
        .iter()
        .filter(|r| r.align.family == "walkway" && r.align.width == 4)
        .map(|r| r.align.queries.unwrap())
        .collect();
    let ok = failures.is_empty();
    report(
        3,
        ok,
        &format!("worst mean queries/|S| {worst_ratio:.3}, walkway 4x4 queries {walkway4:?}, failures {failures:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_04_baseline_contrast() {
    let runs = suite();
    let mut failures = Vec::new();
    let mut means = Vec::new();
    for ((family, w, h), group) in cells(runs) {
        if family != "walkway" && family != "obstacles" {
            continue;
        }
        let ird_mean = group.iter().map(|r| r.ird.violations as f64).sum::<f64>() / group.len() as f64;
        let align_max = group.iter().map(|r| r.align.violations).max().unwrap_or(0);
        means.push(format!("{family} {w}x{h} {ird_mean:.1}"));
        if ird_mean <= 0.0 || align_max > 0 {
            failures.push(format!("{family} {w}x{h}: ird mean {ird_mean}, align max {align_max}"));
        }
    }
    let ok = failures.is_empty() && means.len() == 8;
    report(
        4,
        ok,
        &format!(
            "baseline mean violations [{}], align 0 everywhere, failures {failures:?}",
            means.join(", ")
        ),
    );
    assert!(ok);
}

/// SWITCH reward with button-press rewards `u = r(s0, b1)`, `v = r(s0, b2)`.
fn switch_reward(u: f64, v: f64) -> RewardFunction {
    RewardFunction::new(3, 2, vec![u, v, 0.0, 0.0, 0.0, 0.0]).unwrap()
}

/// Independent check by enumeration: every optimal deterministic policy of
/// `domain` satisfies `truth`. Stochastic optimal policies mix these, so the
/// set predicate agrees with the LP one.
fn enumerated_sufficient(domain: &Domain, reward: &RewardFunction, truth: &ExpectationSet) -> bool {
    let opt = brute_force_optimal_set(domain, reward, None).unwrap();
    opt.policies
        .iter()
        .all(|p| expalign::expectation::violated_elements(&p.occupancy, truth, 1e-6).is_empty())
}

#[test]
fn criterion_05_no_safe_reward_on_switch() {
    let clock = Instant::now();
    let sw = fixtures::switch();
    let params = FormulationParams::default();
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut witnesses = Vec::new();
    let mut disagreements = Vec::new();
    let mut points = 0;
    for &u in &grid {
        for &v in &grid {
            points += 1;
            let r = switch_reward(u, v);
            let sufficient = is_human_sufficient(&sw.human_domain, &r, &sw.ground_truth, &params).unwrap();
            let misspecified = is_misspecified(&sw.robot_domain, &r, &sw.ground_truth, &params).unwrap();
            let brute_h = enumerated_sufficient(&sw.human_domain, &r, &sw.ground_truth);
            let brute_r = enumerated_sufficient(&sw.robot_domain, &r, &sw.ground_truth);
            if sufficient != brute_h || misspecified == brute_r {
                disagreements.push((u, v));
            }
            if sufficient && !misspecified {
                witnesses.push((u, v));
            }
        }
    }
    let elapsed = clock.elapsed();
    let ok = points == 25 && witnesses.is_empty() && disagreements.is_empty() && elapsed < Duration::from_secs(5);
    report(
        5,
        ok,
        &format!(
            "{points} rewards searched in {elapsed:.2?}: sufficient-and-aligned {witnesses:?}, predicate/enumeration disagreements {disagreements:?}"
        ),
    );
    assert!(ok);
}

/// A deterministic robot policy avoiding every state in `avoid` and
/// reaching every state in `visit`, if one exists.
fn aligned_deterministic_policy(
    robot: &Domain,
    avoid: &BTreeSet<usize>,
    visit: &BTreeSet<usize>,
    eps_visit: f64,
) -> Option<Policy> {
    let zero = RewardFunction::zeros(robot);
    enumerate_policies(robot, &zero)
        .unwrap()
        .into_iter()
        .find(|p| {
            avoid.iter().all(|&s| p.occupancy.state(s) <= 1e-12)
                && visit.iter().all(|&s| p.occupancy.state(s) >= eps_visit)
        })
        .map(|p| p.policy)
}

#[test]
fn criterion_06_clean_first_round_needs_no_queries() {
    let params = FormulationParams::default();
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut seed = 0u64;
    while checked < 50 && seed < 10_000 {
        seed += 1;
        let mut inst = random_instance(2 + (seed as usize % 4), 2, 0.9, seed);
        let sup = compute_supersets(&inst.human_domain, &inst.reward, PlanningFunction::OptimalSet, &params).unwrap();
        if aligned_deterministic_policy(
            &inst.robot_domain,
            &sup.forbidden_candidates,
            &sup.goal_candidates,
            params.eps_visit,
        )
        .is_none()
        {
            continue;
        }
        inst.ground_truth = ExpectationSet::from_sets(
            sup.forbidden_candidates.iter().copied(),
            sup.goal_candidates.iter().copied(),
        );
        checked += 1;
        let session = QuerySession::start(
            &inst.human_domain,
            &inst.reward,
            &inst.robot_domain,
            PlanningFunction::OptimalSet,
            params,
        )
        .unwrap();
        let max_d = session.rounds()[0].slacks.iter().map(|(_, d)| *d).fold(0.0, f64::max);
        let solved = matches!(session.status(), SessionStatus::Solved { .. });
        if max_d > 1e-7 || session.num_queries() > 0 || !session.pending().is_empty() || !solved {
            failures.push((seed, max_d));
        }
    }
    let ok = checked == 50 && failures.is_empty();
    report(
        6,
        ok,
        &format!("{checked} instances with an enumerated aligned policy: all first-round slacks <= 1e-7 and no queries (failures {failures:?})"),
    );
    assert!(ok);
}

fn beale() -> LpProblem {
    let mut lp = LpProblem::with_objective(vec![0.75, -20.0, 0.5, -6.0]);
    lp.add(vec![0.25, -8.0, -1.0, 9.0], Relation::Le, 0.0)
        .add(vec![0.5, -12.0, -0.5, 3.0], Relation::Le, 0.0)
        .add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
    lp
}

#[test]
fn criterion_07_lp_solver_corpus() {
    let mut failures = Vec::new();
    let mut statuses = [0usize; 3];
    for seed in 0..20 {
        let lp = random_bounded_lp(seed);
        let (want, best) = vertex_enumeration(&lp);
        let got = solve(&lp).unwrap();
        statuses[want as usize] += 1;
        let objective_ok = match (best, got.objective_value) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-7,
            (None, None) => true,
            _ => false,
        };
        if got.status != want || !objective_ok {
            failures.push(format!(
                "seed {seed}: {:?} {:?} vs {want:?} {best:?}",
                got.status, got.objective_value
            ));
        }
    }

    let mut optimal = LpProblem::with_objective(vec![3.0, 2.0]);
    optimal
        .add(vec![1.0, 1.0], Relation::Le, 4.0)
        .add(vec![1.0, 3.0], Relation::Le, 6.0);
    let mut infeasible = LpProblem::with_objective(vec![1.0]);
    infeasible
        .add(vec![1.0], Relation::Le, 1.0)
        .add(vec![1.0], Relation::Ge, 2.0);
    let mut unbounded = LpProblem::with_objective(vec![1.0, 0.0]);
    unbounded.add(vec![1.0, -1.0], Relation::Le, 1.0);
    let hand = [
        ("optimal", optimal, LpStatus::Optimal, Some(12.0)),
        ("infeasible", infeasible, LpStatus::Infeasible, None),
        ("unbounded", unbounded, LpStatus::Unbounded, None),
    ];
    for (name, lp, status, value) in &hand {
        let got = solve(lp).unwrap();
        let value_ok = match (value, got.objective_value) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-7,
            (None, _) => true,
            _ => false,
        };
        if got.status != *status || !value_ok {
            failures.push(format!("{name}: {:?} {:?}", got.status, got.objective_value));
        }
    }

    for rule in [PivotRule::Bland, PivotRule::Dantzig] {
        let got = solve_with(
            &beale(),
            &SolverOptions {
                rule,
                ..Default::default()
            },
        )
        .unwrap();
        if got.status != LpStatus::Optimal || (got.objective_value.unwrap() - 1.25).abs() > 1e-7 {
            failures.push(format!("beale {rule:?}: {:?} {:?}", got.status, got.objective_value));
        }
    }

    let ok = failures.is_empty();
    report(
        7,
        ok,
        &format!(
            "20 random LPs ({} optimal, {} infeasible per enumeration), 3 status cases and the cycling example under both rules (failures {failures:?})",
            statuses[LpStatus::Optimal as usize],
            statuses[LpStatus::Infeasible as usize]
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_numerical_invariants() {
    let mut checked = 0usize;
    let mut worst_mass: f64 = 0.0;
    let mut worst_flow: f64 = 0.0;
    let mut worst_value: f64 = 0.0;
    let mut check = |occ: &OccupancyVector, domain: &Domain| {
        let (m, f) = occupancy_residuals(occ, domain);
        worst_mass = worst_mass.max(m);
        worst_flow = worst_flow.max(f);
        checked += 1;
    };

    for (domain, reward) in corpus() {
        let opt = solve_optimal(&domain, &reward).unwrap();
        check(&opt.occupancy, &domain);
        let v = bellman_evaluate(&domain, &reward, &opt.policy, 1e-13);
        worst_value = worst_value.max((v[domain.start()] - opt.value).abs());
        for p in enumerate_policies(&domain, &reward).unwrap() {
            check(&p.occupancy, &domain);
        }
    }
    for run in suite() {
        for occ in &run.occupancies {
            check(occ, &run.instance.robot_domain);
        }
    }
    for inst in fixtures::all().into_iter().chain(
        [Family::Walkway, Family::Obstacles, Family::Puddle]
            .into_iter()
            .map(|f| benchmarks::generate(f, 5, 5, 1).unwrap()),
    ) {
        let sup = compute_supersets(
            &inst.human_domain,
            &inst.reward,
            PlanningFunction::OptimalSet,
            &Default::default(),
        )
        .unwrap();
        let out = run_ird(&inst, &sup, DEFAULT_REWARD_HIGH, DEFAULT_REWARD_LOW).unwrap();
        check(&out.occupancy, &inst.robot_domain);
        let opt = solve_optimal(&inst.human_domain, &inst.reward).unwrap();
        check(&opt.occupancy, &inst.human_domain);
        let v = bellman_evaluate(&inst.human_domain, &inst.reward, &opt.policy, 1e-13);
        worst_value = worst_value.max((v[inst.human_domain.start()] - opt.value).abs());
    }

    let ok = worst_mass <= INVARIANT_TOL && worst_flow <= INVARIANT_TOL && worst_value <= INVARIANT_TOL;
    report(
        8,
        ok,
        &format!("{checked} occupancies: max mass residual {worst_mass:.1e}, max flow residual {worst_flow:.1e}, max value gap {worst_value:.1e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_09_scale_runtime() {
    let inst = benchmarks::generate(Family::Walkway, 11, 11, 1).unwrap();
    let clock = Instant::now();
    let run = run_align(&inst, PlanningFunction::OptimalSet, FormulationParams::default()).unwrap();
    let elapsed = clock.elapsed();
    let ok = run.record.solved && elapsed < Duration::from_secs(600);
    report(
        9,
        ok,
        &format!(
            "walkway 11x11 ({} states) aligned in {elapsed:.2?} with {} queries",
            inst.num_states(),
            run.record.queries.unwrap()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_noisy_rational_containment() {
    let params = FormulationParams::default();
    let mut failures = Vec::new();
    for (i, (domain, reward)) in corpus().iter().enumerate() {
        let opt = compute_supersets(domain, reward, PlanningFunction::OptimalSet, &params).unwrap();
        let threshold = opt.optimal_value - 1e-6;
        let noisy = compute_supersets(domain, reward, PlanningFunction::NoisyRational { threshold }, &params).unwrap();
        if !opt.forbidden_candidates.is_subset(&noisy.forbidden_candidates)
            || !opt.goal_candidates.is_subset(&noisy.goal_candidates)
        {
            failures.push(i);
        }
    }
    let ok = failures.is_empty();
    report(
        10,
        ok,
        &format!(
            "noisy supersets contain the optimal ones on {}/{CORPUS_SIZE} random MDPs (failures {failures:?})",
            CORPUS_SIZE as usize - failures.len()
        ),
    );
    assert!(ok);
}
