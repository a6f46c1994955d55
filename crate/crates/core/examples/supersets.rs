//! Forbidden and goal supersets of a grid, drawn over the layout.

use expalign::benchmarks::generate;
use expalign::formulation::compute_supersets;
use expalign::{Family, FormulationParams, PlanningFunction};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let inst = generate(Family::Puddle, 7, 7, 2)?;
    let sup = compute_supersets(
        &inst.human_domain,
        &inst.reward,
        PlanningFunction::OptimalSet,
        &FormulationParams::default(),
    )?;
    println!("{}: V* = {:.4}", inst.name, sup.optimal_value);
    println!("F = never visited by any optimal policy, G = always visited, # = wall");
    let layout = inst.layout.as_ref().expect("grid instance");
    for r in 0..layout.height {
        let row: String = (0..layout.width)
            .map(|c| match inst.robot_domain.state_index(&format!("r{r}c{c}")) {
                None => '#',
                Some(s) if sup.goal_candidates.contains(&s) => 'G',
                Some(s) if sup.forbidden_candidates.contains(&s) => 'F',
                Some(_) => '.',
            })
            .collect();
        println!("  {row}");
    }
    println!(
        "|F| = {}, |G| = {}, |S| = {}",
        sup.forbidden_candidates.len(),
        sup.goal_candidates.len(),
        inst.num_states()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
