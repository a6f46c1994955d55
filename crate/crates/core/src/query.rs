//! The query loop.
//!
//! A session starts from the candidate supersets of the user's model and
//! repeatedly solves the query program in the agent's model. Candidates whose
//! slack is positive block an aligned policy; they are put to the oracle as
//! one batch, the answers move them into confirmed sets or drop them, and the
//! program is solved again. The loop ends once every slack is zero (solved)
//! or the hard constraints become infeasible (no solution).

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::expectation::{ExpectationSet, PlanningFunction};
pub use crate::formulation::QueryKind;
use crate::formulation::{
    build_query_lp, compute_supersets, extract_policy, solve_query_lp, FormulationError, FormulationParams,
    QueryConstraints, QueryLp, QuerySolve, SupersetResult,
};
use crate::mdp::{Domain, ModelError, OccupancyVector, Policy, RewardFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OracleAnswer {
    MustAvoid,
    MustVisit,
    Neither,
}

impl OracleAnswer {
    pub fn valid_for(self, kind: QueryKind) -> bool {
        matches!(
            (self, kind),
            (OracleAnswer::Neither, _)
                | (OracleAnswer::MustAvoid, QueryKind::Forbidden)
                | (OracleAnswer::MustVisit, QueryKind::Goal)
        )
    }
}

impl fmt::Display for OracleAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleAnswer::MustAvoid => "must_avoid",
            OracleAnswer::MustVisit => "must_visit",
            OracleAnswer::Neither => "neither",
        })
    }
}

/// One answer submitted to [`QuerySession::step`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Answer {
    pub state: usize,
    pub kind: QueryKind,
    pub verdict: OracleAnswer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryRecord {
    pub state: usize,
    pub kind: QueryKind,
    pub answer: OracleAnswer,
    pub iteration: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SessionStatus {
    AwaitingAnswers,
    Solved {
        policy: Policy,
        occupancy: OccupancyVector,
    },
    /// The confirmed constraints admit no policy.
    NoSolution,
    /// Slacks stayed positive with nothing left to ask.
    Exhausted,
}

impl SessionStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SessionStatus::AwaitingAnswers => "awaiting_answers",
            SessionStatus::Solved { .. } => "solved",
            SessionStatus::NoSolution => "no_solution",
            SessionStatus::Exhausted => "exhausted",
        }
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, SessionStatus::AwaitingAnswers)
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("answers do not match the pending queries: {0}")]
    AnswerMismatch(String),
    #[error("session is {0}, not awaiting answers")]
    IllegalState(&'static str),
    #[error("oracle failed: {0}")]
    Oracle(String),
}

/// Answers avoid/visit questions about states.
pub trait Oracle {
    fn answer(&mut self, state: usize, kind: QueryKind) -> Result<OracleAnswer, QueryError>;
}

impl<F> Oracle for F
where
    F: FnMut(usize, QueryKind) -> OracleAnswer,
{
    fn answer(&mut self, state: usize, kind: QueryKind) -> Result<OracleAnswer, QueryError> {
        Ok(self(state, kind))
    }
}

/// Answers from a known expectation set.
#[derive(Clone, Debug, Default)]
pub struct GroundTruthOracle {
    forbidden: BTreeSet<usize>,
    goals: BTreeSet<usize>,
}

impl GroundTruthOracle {
    pub fn new(truth: &ExpectationSet) -> Self {
        Self {
            forbidden: truth.forbidden_states().into_iter().collect(),
            goals: truth.goal_states().into_iter().collect(),
        }
    }
}

impl Oracle for GroundTruthOracle {
    fn answer(&mut self, state: usize, kind: QueryKind) -> Result<OracleAnswer, QueryError> {
        Ok(match kind {
            QueryKind::Forbidden if self.forbidden.contains(&state) => OracleAnswer::MustAvoid,
            QueryKind::Goal if self.goals.contains(&state) => OracleAnswer::MustVisit,
            _ => OracleAnswer::Neither,
        })
    }
}

/// Asks on a text stream and reads `y`, `n` or `neither` per question.
pub struct InteractiveOracle<R, W> {
    input: R,
    output: W,
    labels: Vec<String>,
}

impl<R: BufRead, W: Write> InteractiveOracle<R, W> {
    /// `labels[s]` names state `s` in prompts.
    pub fn new(input: R, output: W, labels: Vec<String>) -> Self {
        Self { input, output, labels }
    }
}

impl<R: BufRead, W: Write> Oracle for InteractiveOracle<R, W> {
    fn answer(&mut self, state: usize, kind: QueryKind) -> Result<OracleAnswer, QueryError> {
        let io = |e: std::io::Error| QueryError::Oracle(e.to_string());
        let label = self.labels.get(state).map_or_else(|| state.to_string(), Clone::clone);
        let verb = match kind {
            QueryKind::Forbidden => "avoid",
            QueryKind::Goal => "visit",
        };
        loop {
            write!(self.output, "Do I need to {verb} {label}? [y/n] ").map_err(io)?;
            self.output.flush().map_err(io)?;
            let mut line = String::new();
            if self.input.read_line(&mut line).map_err(io)? == 0 {
                return Err(QueryError::Oracle(
                    "input closed before all queries were answered".into(),
                ));
            }
            match line.trim().to_ascii_lowercase().as_str() {
                "y" | "yes" => {
                    return Ok(match kind {
                        QueryKind::Forbidden => OracleAnswer::MustAvoid,
                        QueryKind::Goal => OracleAnswer::MustVisit,
                    })
                }
                "n" | "no" | "neither" => return Ok(OracleAnswer::Neither),
                _ => writeln!(self.output, "please answer y, n or neither").map_err(io)?,
            }
        }
    }
}

/// Constraints and outcome of one solve of the query program.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub iteration: usize,
    pub constraints: QueryConstraints,
    /// Slack value per relaxed `(state, kind)`; empty when infeasible.
    pub slacks: Vec<((usize, QueryKind), f64)>,
}

/// Mutable state of one run of the query loop.
#[derive(Clone, Debug)]
pub struct QuerySession {
    robot: Domain,
    params: FormulationParams,
    planning: PlanningFunction,
    initial: SupersetResult,
    sets: QueryConstraints,
    pending: Vec<(usize, QueryKind)>,
    log: Vec<QueryRecord>,
    rounds: Vec<RoundRecord>,
    status: SessionStatus,
    iteration: usize,
}

impl QuerySession {
    /// Computes the supersets in the user's model and solves the first query
    /// program in the agent's model.
    pub fn start(
        human: &Domain,
        reward: &RewardFunction,
        robot: &Domain,
        planning: PlanningFunction,
        params: FormulationParams,
    ) -> Result<Self, QueryError> {
        human.ensure_shared_spaces(robot)?;
        let initial = compute_supersets(human, reward, planning, &params)?;
        let sets = QueryConstraints {
            forbidden_candidates: initial.forbidden_candidates.clone(),
            goal_candidates: initial.goal_candidates.clone(),
            ..Default::default()
        };
        let mut session = Self {
            robot: robot.clone(),
            params,
            planning,
            initial,
            sets,
            pending: Vec::new(),
            log: Vec::new(),
            rounds: Vec::new(),
            status: SessionStatus::AwaitingAnswers,
            iteration: 0,
        };
        session.solve_round()?;
        Ok(session)
    }

    pub fn status(&self) -> &SessionStatus {
        &self.status
    }

    /// Pending queries, ordered by state then forbidden before goal.
    pub fn pending(&self) -> &[(usize, QueryKind)] {
        &self.pending
    }

    pub fn query_log(&self) -> &[QueryRecord] {
        &self.log
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    /// Number of answered query rounds.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn planning(&self) -> PlanningFunction {
        self.planning
    }

    pub fn params(&self) -> &FormulationParams {
        &self.params
    }

    pub fn robot(&self) -> &Domain {
        &self.robot
    }

    pub fn initial_supersets(&self) -> &SupersetResult {
        &self.initial
    }

    pub fn forbidden_candidates(&self) -> &BTreeSet<usize> {
        &self.sets.forbidden_candidates
    }

    pub fn goal_candidates(&self) -> &BTreeSet<usize> {
        &self.sets.goal_candidates
    }

    pub fn confirmed_forbidden(&self) -> &BTreeSet<usize> {
        &self.sets.confirmed_forbidden
    }

    pub fn confirmed_goal(&self) -> &BTreeSet<usize> {
        &self.sets.confirmed_goal
    }

    pub fn num_queries(&self) -> usize {
        self.log.len()
    }

    /// The query program for the current constraint sets.
    pub fn query_lp(&self) -> QueryLp {
        build_query_lp(&self.robot, &self.sets, &self.params)
    }

    /// Applies one answer per pending query and solves again.
    pub fn step(&mut self, answers: &[Answer]) -> Result<&SessionStatus, QueryError> {
        if self.status.is_terminal() {
            return Err(QueryError::IllegalState(self.status.label()));
        }
        let mut keys: Vec<(usize, QueryKind)> = answers.iter().map(|a| (a.state, a.kind)).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(QueryError::AnswerMismatch("duplicate answer".into()));
        }
        if keys != self.pending {
            return Err(QueryError::AnswerMismatch(format!(
                "expected answers for {:?}, got {:?}",
                self.pending, keys
            )));
        }
        if let Some(bad) = answers.iter().find(|a| !a.verdict.valid_for(a.kind)) {
            return Err(QueryError::AnswerMismatch(format!(
                "{} is not a valid answer to a {} query about state {}",
                bad.verdict, bad.kind, bad.state
            )));
        }

        self.iteration += 1;
        let mut sorted = answers.to_vec();
        sorted.sort_unstable_by_key(|a| (a.state, a.kind));
        for a in sorted {
            let sets = &mut self.sets;
            match a.verdict {
                OracleAnswer::MustAvoid => {
                    sets.forbidden_candidates.remove(&a.state);
                    sets.goal_candidates.remove(&a.state);
                    sets.confirmed_forbidden.insert(a.state);
                }
                OracleAnswer::MustVisit => {
                    sets.forbidden_candidates.remove(&a.state);
                    sets.goal_candidates.remove(&a.state);
                    sets.confirmed_goal.insert(a.state);
                }
                OracleAnswer::Neither => {
                    match a.kind {
                        QueryKind::Forbidden => sets.forbidden_candidates.remove(&a.state),
                        QueryKind::Goal => sets.goal_candidates.remove(&a.state),
                    };
                }
            }
            self.log.push(QueryRecord {
                state: a.state,
                kind: a.kind,
                answer: a.verdict,
                iteration: self.iteration,
            });
        }
        self.pending.clear();
        self.solve_round()?;
        Ok(&self.status)
    }

    fn solve_round(&mut self) -> Result<(), QueryError> {
        let lp = build_query_lp(&self.robot, &self.sets, &self.params);
        let solved = solve_query_lp(&self.robot, &lp)?;
        let mut record = RoundRecord {
            iteration: self.iteration,
            constraints: self.sets.clone(),
            slacks: Vec::new(),
        };
        match solved {
            QuerySolve::Infeasible => {
                self.status = SessionStatus::NoSolution;
            }
            QuerySolve::Feasible {
                occupancy,
                slack_values,
            } => {
                record.slacks = lp.slacks.iter().copied().zip(slack_values.iter().copied()).collect();
                let positive: Vec<(usize, QueryKind)> = record
                    .slacks
                    .iter()
                    .filter(|(_, d)| *d > self.params.d_threshold)
                    .map(|(k, _)| *k)
                    .collect();
                if positive.is_empty() {
                    let policy = extract_policy(&occupancy, self.params.d_threshold);
                    self.status = SessionStatus::Solved { policy, occupancy };
                } else {
                    let askable: Vec<(usize, QueryKind)> = positive
                        .into_iter()
                        .filter(|&(s, k)| !self.log.iter().any(|r| r.state == s && r.kind == k))
                        .collect();
                    if askable.is_empty() {
                        self.status = SessionStatus::Exhausted;
                    } else {
                        self.pending = askable;
                        self.status = SessionStatus::AwaitingAnswers;
                    }
                }
            }
        }
        self.rounds.push(record);
        Ok(())
    }

    /// Answers every pending query with `oracle` until the session ends.
    pub fn run(&mut self, oracle: &mut dyn Oracle) -> Result<&SessionStatus, QueryError> {
        while !self.status.is_terminal() {
            let mut answers = Vec::with_capacity(self.pending.len());
            for &(state, kind) in &self.pending {
                answers.push(Answer {
                    state,
                    kind,
                    verdict: oracle.answer(state, kind)?,
                });
            }
            self.step(&answers)?;
        }
        Ok(&self.status)
    }
}

/// Starts a session and drives it to a terminal status with `oracle`.
pub fn run_to_completion(
    human: &Domain,
    reward: &RewardFunction,
    robot: &Domain,
    oracle: &mut dyn Oracle,
    planning: PlanningFunction,
    params: FormulationParams,
) -> Result<QuerySession, QueryError> {
    let mut session = QuerySession::start(human, reward, robot, planning, params)?;
    session.run(oracle)?;
    Ok(session)
}
