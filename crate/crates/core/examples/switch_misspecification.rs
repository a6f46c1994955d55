//! On the two-button instance no reward over the button presses is both
//! adequate in the user's model and safe in the agent's.

use expalign::benchmarks::fixtures;
use expalign::formulation::{is_human_sufficient, is_misspecified};
use expalign::{FormulationParams, RewardFunction};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let sw = fixtures::switch();
    let params = FormulationParams::default();
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    println!("rows r(s0,b1), columns r(s0,b2); S = sufficient for the user, M = misspecified for the agent");
    for &u in &grid {
        let mut line = format!("{u:>5} |");
        for &v in &grid {
            let r = RewardFunction::new(3, 2, vec![u, v, 0.0, 0.0, 0.0, 0.0])?;
            let s = is_human_sufficient(&sw.human_domain, &r, &sw.ground_truth, &params)?;
            let m = is_misspecified(&sw.robot_domain, &r, &sw.ground_truth, &params)?;
            assert!(!(s && !m), "found a safe reward at ({u}, {v})");
            line.push_str(match (s, m) {
                (true, true) => " SM",
                (true, false) => " S-",
                (false, true) => " -M",
                (false, false) => " --",
            });
        }
        println!("{line}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
