//! The proxy-reward baseline against the query loop on a few grids.

use expalign::benchmarks::generate;
use expalign::harness::{run_align, run_ird_record};
use expalign::ird::{DEFAULT_REWARD_HIGH, DEFAULT_REWARD_LOW};
use expalign::{Family, FormulationParams, PlanningFunction};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let params = FormulationParams::default();
    println!(
        "{:<24} {:>14} {:>8} {:>16}",
        "instance", "ird violations", "queries", "align violations"
    );
    for (family, size) in [
        (Family::Walkway, 5),
        (Family::Obstacles, 5),
        (Family::FourRooms, 7),
        (Family::Maze, 5),
    ] {
        for seed in 1..=2 {
            let inst = generate(family, size, size, seed)?;
            let ird = run_ird_record(
                &inst,
                PlanningFunction::OptimalSet,
                params,
                DEFAULT_REWARD_HIGH,
                DEFAULT_REWARD_LOW,
            )?;
            let align = run_align(&inst, PlanningFunction::OptimalSet, params)?;
            println!(
                "{:<24} {:>14} {:>8} {:>16}",
                inst.name,
                ird.violations,
                align.record.queries.unwrap_or(0),
                align.record.violations
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
