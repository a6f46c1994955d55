//! Driving the query loop by hand on the two-corridor instance.

use expalign::benchmarks::fixtures;
use expalign::query::{Answer, QuerySession};
use expalign::{FormulationParams, OracleAnswer, PlanningFunction, SessionStatus};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let c = fixtures::corridor();
    let d = &c.robot_domain;
    let mut session = QuerySession::start(
        &c.human_domain,
        &c.reward,
        d,
        PlanningFunction::OptimalSet,
        FormulationParams::default(),
    )?;
    while !session.status().is_terminal() {
        let round = session.rounds().last().expect("one round per solve");
        for ((s, kind), slack) in &round.slacks {
            println!("  slack {kind:>9} {:<2} = {slack:.4}", d.state_name(*s));
        }
        let answers: Vec<Answer> = session
            .pending()
            .iter()
            .map(|&(state, kind)| {
                println!(
                    "round {}: ask {kind} about {}? -> neither",
                    session.iteration(),
                    d.state_name(state)
                );
                Answer {
                    state,
                    kind,
                    verdict: OracleAnswer::Neither,
                }
            })
            .collect();
        session.step(&answers)?;
    }
    if let SessionStatus::Solved { policy, occupancy } = session.status() {
        for s in 0..d.num_states() {
            println!(
                "{:>3}: {:<8} x = {:.3}",
                d.state_name(s),
                d.action_name(policy.action(s)),
                occupancy.state(s)
            );
        }
    }
    println!("{} after {} queries", session.status(), session.num_queries());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
