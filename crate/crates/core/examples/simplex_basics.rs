//! The standalone simplex solver: statuses, pivot rules and MPS export.

use expalign::simplex::{solve, solve_with, write_mps, LpProblem, MpsOptions, PivotRule, Relation, SolverOptions};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let mut lp = LpProblem::with_objective(vec![3.0, 2.0]);
    lp.add(vec![1.0, 1.0], Relation::Le, 4.0)
        .add(vec![1.0, 3.0], Relation::Le, 6.0)
        .add_sparse(&[(0, 1.0)], Relation::Ge, 1.0);
    let out = solve(&lp)?;
    println!(
        "{} after {} pivots: z = {:?}, x = {:?}",
        out.status, out.iterations, out.objective_value, out.point
    );

    // A classic degenerate instance that cycles under the textbook rule.
    let mut beale = LpProblem::with_objective(vec![0.75, -20.0, 0.5, -6.0]);
    beale
        .add(vec![0.25, -8.0, -1.0, 9.0], Relation::Le, 0.0)
        .add(vec![0.5, -12.0, -0.5, 3.0], Relation::Le, 0.0)
        .add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
    for rule in [PivotRule::Bland, PivotRule::Dantzig] {
        let out = solve_with(
            &beale,
            &SolverOptions {
                rule,
                ..Default::default()
            },
        )?;
        println!(
            "{rule:?}: {} z = {:?} in {} pivots",
            out.status, out.objective_value, out.iterations
        );
    }

    let mut empty = LpProblem::with_objective(vec![1.0]);
    empty
        .add(vec![1.0], Relation::Le, 1.0)
        .add(vec![1.0], Relation::Ge, 2.0);
    println!("contradictory bounds: {}", solve(&empty)?.status);

    let mut open = LpProblem::with_objective(vec![1.0, 1.0]);
    open.add(vec![1.0, -1.0], Relation::Le, 1.0);
    println!("open direction: {}", solve(&open)?.status);

    print!(
        "{}",
        write_mps(
            &lp,
            &MpsOptions {
                name: "SMALL".into(),
                column_labels: vec!["x".into(), "y".into()],
            }
        )
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
