//! JSON shapes exchanged over the API.

use serde::{Deserialize, Serialize};

use expalign::query::{QueryKind, QuerySession, SessionStatus};
use expalign::{BenchmarkInstance, OracleAnswer, PlanningFunction};

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    /// Name of a loaded instance, or a full instance document.
    pub instance: serde_json::Value,
    #[serde(default)]
    pub planning: PlanningChoice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningChoice {
    #[default]
    Optimal,
    Noisy(f64),
}

impl From<PlanningChoice> for PlanningFunction {
    fn from(p: PlanningChoice) -> Self {
        match p {
            PlanningChoice::Optimal => PlanningFunction::OptimalSet,
            PlanningChoice::Noisy(threshold) => PlanningFunction::NoisyRational { threshold },
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct AnswerBatch {
    pub answers: Vec<AnswerEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnswerEntry {
    pub state: String,
    pub kind: String,
    pub verdict: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub state: String,
    pub kind: String,
    pub prompt: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub state: String,
    pub kind: String,
    pub answer: String,
    pub iteration: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSets {
    pub forbidden: Vec<String>,
    pub goal: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub state: String,
    pub action: String,
    pub occupancy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyView {
    pub states: Vec<PolicyEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionResource {
    pub id: String,
    pub instance: String,
    pub status: String,
    pub iteration: usize,
    pub pending: Vec<PendingQuery>,
    pub candidates: StateSets,
    pub confirmed: StateSets,
    pub history: Vec<HistoryEntry>,
    pub policy: Option<PolicyView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub name: String,
    pub num_states: usize,
    pub num_actions: usize,
    pub grid: Option<(usize, usize)>,
}

impl InstanceSummary {
    pub fn of(instance: &BenchmarkInstance) -> Self {
        Self {
            name: instance.name.clone(),
            num_states: instance.num_states(),
            num_actions: instance.robot_domain.num_actions(),
            grid: instance.layout.as_ref().map(|l| (l.width, l.height)),
        }
    }
}

pub fn parse_kind(text: &str) -> Option<QueryKind> {
    match text {
        "forbidden" => Some(QueryKind::Forbidden),
        "goal" => Some(QueryKind::Goal),
        _ => None,
    }
}

pub fn parse_verdict(text: &str) -> Option<OracleAnswer> {
    match text {
        "must_avoid" => Some(OracleAnswer::MustAvoid),
        "must_visit" => Some(OracleAnswer::MustVisit),
        "neither" => Some(OracleAnswer::Neither),
        _ => None,
    }
}

/// English question for one pending query.
pub fn prompt(instance: &BenchmarkInstance, state: usize, kind: QueryKind) -> String {
    let verb = match kind {
        QueryKind::Forbidden => "avoid",
        QueryKind::Goal => "visit",
    };
    match instance.cell_of(state) {
        Some((r, c)) => format!("Do I need to {verb} cell ({r},{c})?"),
        None => format!("Do I need to {verb} {}?", instance.robot_domain.state_name(state)),
    }
}

fn names<'a>(instance: &BenchmarkInstance, states: impl IntoIterator<Item = &'a usize>) -> Vec<String> {
    states
        .into_iter()
        .map(|&s| instance.robot_domain.state_name(s).to_string())
        .collect()
}

pub fn policy_view(instance: &BenchmarkInstance, status: &SessionStatus) -> Option<PolicyView> {
    let SessionStatus::Solved { policy, occupancy } = status else {
        return None;
    };
    let d = &instance.robot_domain;
    let states = (0..d.num_states())
        .map(|s| PolicyEntry {
            state: d.state_name(s).to_string(),
            action: d.action_name(policy.action(s)).to_string(),
            occupancy: occupancy.state(s),
            cell: instance.cell_of(s),
        })
        .collect();
    Some(PolicyView { states })
}

pub fn render(id: &str, instance: &BenchmarkInstance, session: &QuerySession) -> SessionResource {
    let d = &instance.robot_domain;
    SessionResource {
        id: id.to_string(),
        instance: instance.name.clone(),
        status: session.status().label().to_string(),
        iteration: session.iteration(),
        pending: session
            .pending()
            .iter()
            .map(|&(s, kind)| PendingQuery {
                state: d.state_name(s).to_string(),
                kind: kind.to_string(),
                prompt: prompt(instance, s, kind),
            })
            .collect(),
        candidates: StateSets {
            forbidden: names(instance, session.forbidden_candidates()),
            goal: names(instance, session.goal_candidates()),
        },
        confirmed: StateSets {
            forbidden: names(instance, session.confirmed_forbidden()),
            goal: names(instance, session.confirmed_goal()),
        },
        history: session
            .query_log()
            .iter()
            .map(|q| HistoryEntry {
                state: d.state_name(q.state).to_string(),
                kind: q.kind.to_string(),
                answer: q.answer.to_string(),
                iteration: q.iteration,
            })
            .collect(),
        policy: policy_view(instance, session.status()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planning_accepts_both_shapes() {
        let p: PlanningChoice = serde_json::from_str("\"optimal\"").unwrap();
        assert_eq!(p, PlanningChoice::Optimal);
        let p: PlanningChoice = serde_json::from_str(r#"{"noisy": 0.5}"#).unwrap();
        assert_eq!(
            PlanningFunction::from(p),
            PlanningFunction::NoisyRational { threshold: 0.5 }
        );
    }

    #[test]
    fn prompts_use_cells_when_available() {
        let g = expalign::benchmarks::generate(expalign::Family::Walkway, 4, 4, 1).unwrap();
        let s = g.robot_domain.state_index("r1c2").unwrap();
        assert_eq!(prompt(&g, s, QueryKind::Forbidden), "Do I need to avoid cell (1,2)?");
        let c = expalign::benchmarks::fixtures::corridor();
        assert_eq!(prompt(&c, 2, QueryKind::Goal), "Do I need to visit A?");
    }
}
