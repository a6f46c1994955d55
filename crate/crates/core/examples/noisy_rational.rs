//! Supersets under a value threshold grow as the threshold loosens.

use expalign::benchmarks::fixtures;
use expalign::formulation::{compute_supersets, FormulationError};
use expalign::{FormulationParams, PlanningFunction};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let c = fixtures::corridor();
    let d = &c.human_domain;
    let params = FormulationParams::default();
    let opt = compute_supersets(d, &c.reward, PlanningFunction::OptimalSet, &params)?;
    let names = |set: &std::collections::BTreeSet<usize>| set.iter().map(|&s| d.state_name(s)).collect::<Vec<_>>();
    println!(
        "optimal: F = {:?}, G = {:?}, V* = {:.4}",
        names(&opt.forbidden_candidates),
        names(&opt.goal_candidates),
        opt.optimal_value
    );

    for gap in [1e-6, 0.5, 2.0, 8.0] {
        let threshold = opt.optimal_value - gap;
        let sup = compute_supersets(d, &c.reward, PlanningFunction::NoisyRational { threshold }, &params)?;
        println!(
            "threshold V* - {gap:<6}: F = {:?}, G = {:?}",
            names(&sup.forbidden_candidates),
            names(&sup.goal_candidates)
        );
    }

    match compute_supersets(
        d,
        &c.reward,
        PlanningFunction::NoisyRational {
            threshold: opt.optimal_value + 1.0,
        },
        &params,
    ) {
        Err(FormulationError::ThresholdAboveOptimum { threshold, optimum }) => {
            println!("threshold {threshold:.3} above the optimum {optimum:.3} is rejected")
        }
        other => return Err(format!("unexpected {other:?}").into()),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
