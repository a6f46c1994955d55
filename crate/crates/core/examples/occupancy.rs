//! Occupancy of a policy by direct solve, checked against the LP optimum.

use expalign::benchmarks::fixtures;
use expalign::formulation::solve_optimal;
use expalign::mdp::{evaluate_policy, occupancy_of_policy};
use expalign::Policy;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let corridor = fixtures::corridor();
    let d = &corridor.robot_domain;

    // goW from s0, then advance everywhere
    let policy = Policy::Deterministic(vec![0, 2, 2, 2]);
    let occ = occupancy_of_policy(d, &policy)?;
    for s in 0..d.num_states() {
        println!("{:>3}  x(s) = {:.4}", d.state_name(s), occ.state(s));
    }
    println!("mass {:.6} (1/(1-gamma) = {:.6})", occ.total(), 1.0 / (1.0 - d.gamma()));
    println!("flow residual {:.1e}", occ.flow_residual(d));

    let best = solve_optimal(d, &corridor.reward)?;
    let v = evaluate_policy(d, &corridor.reward, &policy)?;
    println!("policy value {v:.6}, optimum {:.6}", best.value);
    assert!((v - best.value).abs() < 1e-9);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
