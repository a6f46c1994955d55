//! JSON instance files.
//!
//! States and actions are referenced by id. Omitted transitions have
//! probability zero and omitted rewards are zero. Rewards are written as
//! `[state, value]` pairs when state-based and `[state, action, value]`
//! triples otherwise; both shapes are accepted on input.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BenchmarkInstance, Layout};
use crate::expectation::{Comparison, ExpectationElement, ExpectationSet};
use crate::mdp::{Domain, ModelError, RewardFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: unknown state `{name}`")]
    UnknownState { field: &'static str, name: String },
    #[error("{field}: unknown action `{name}`")]
    UnknownAction { field: &'static str, name: String },
    #[error("expectations[{index}]: {message}")]
    Expectation { index: usize, message: String },
    #[error("{field}: {source}")]
    Model {
        field: &'static str,
        #[source]
        source: ModelError,
    },
}

type Transition = (String, String, String, f64);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RewardEntry {
    State(String, f64),
    Pair(String, String, f64),
}

#[derive(Serialize, Deserialize)]
struct ExpectationEntry {
    states: Vec<String>,
    op: String,
    k: f64,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    seed: u64,
    gamma: f64,
    s0: String,
    states: Vec<String>,
    actions: Vec<String>,
    robot_transitions: Vec<Transition>,
    human_transitions: Vec<Transition>,
    #[serde(default)]
    reward: Vec<RewardEntry>,
    #[serde(default)]
    expectations: Vec<ExpectationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layout: Option<Layout>,
}

fn transitions(domain: &Domain) -> Vec<Transition> {
    domain
        .transition_entries()
        .map(|(s, a, n, p)| {
            (
                domain.state_name(s).to_string(),
                domain.action_name(a).to_string(),
                domain.state_name(n).to_string(),
                p,
            )
        })
        .collect()
}

/// Pretty-printed JSON for `instance`.
pub fn serialize(instance: &BenchmarkInstance) -> String {
    let d = &instance.robot_domain;
    let reward = if instance.reward.is_state_based() {
        let per_state = instance.reward.per_state().expect("checked state-based");
        per_state
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(s, &v)| RewardEntry::State(d.state_name(s).to_string(), v))
            .collect()
    } else {
        let mut entries = Vec::new();
        for s in 0..d.num_states() {
            for a in 0..d.num_actions() {
                let v = instance.reward.get(s, a);
                if v != 0.0 {
                    entries.push(RewardEntry::Pair(d.state_name(s).into(), d.action_name(a).into(), v));
                }
            }
        }
        entries
    };
    let file = InstanceFile {
        name: instance.name.clone(),
        seed: instance.seed,
        gamma: d.gamma(),
        s0: d.state_name(d.start()).to_string(),
        states: d.states().to_vec(),
        actions: d.actions().to_vec(),
        robot_transitions: transitions(d),
        human_transitions: transitions(&instance.human_domain),
        reward,
        expectations: instance
            .ground_truth
            .iter()
            .map(|e| ExpectationEntry {
                states: e.states().iter().map(|&s| d.state_name(s).to_string()).collect(),
                op: e.op().symbol().to_string(),
                k: e.k(),
            })
            .collect(),
        layout: instance.layout.clone(),
    };
    serde_json::to_string_pretty(&file).expect("instance serializes")
}

struct Names<'a> {
    states: HashMap<&'a str, usize>,
    actions: HashMap<&'a str, usize>,
}

impl Names<'_> {
    fn state(&self, field: &'static str, name: &str) -> Result<usize, InstanceError> {
        self.states
            .get(name)
            .copied()
            .ok_or_else(|| InstanceError::UnknownState {
                field,
                name: name.to_string(),
            })
    }

    fn action(&self, field: &'static str, name: &str) -> Result<usize, InstanceError> {
        self.actions
            .get(name)
            .copied()
            .ok_or_else(|| InstanceError::UnknownAction {
                field,
                name: name.to_string(),
            })
    }
}

fn domain(
    file: &InstanceFile,
    names: &Names,
    field: &'static str,
    rows: &[Transition],
) -> Result<Domain, InstanceError> {
    let start = names.state("s0", &file.s0)?;
    let triples = rows
        .iter()
        .map(|(s, a, n, p)| {
            Ok((
                names.state(field, s)?,
                names.action(field, a)?,
                names.state(field, n)?,
                *p,
            ))
        })
        .collect::<Result<Vec<_>, InstanceError>>()?;
    Domain::new(file.states.clone(), file.actions.clone(), file.gamma, start, triples)
        .map_err(|source| InstanceError::Model { field, source })
}

/// Parses and validates an instance file.
pub fn deserialize(text: &str) -> Result<BenchmarkInstance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| InstanceError::Schema {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let names = Names {
        states: file.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect(),
        actions: file.actions.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect(),
    };
    let robot = domain(&file, &names, "robot_transitions", &file.robot_transitions)?;
    let human = domain(&file, &names, "human_transitions", &file.human_transitions)?;

    let (ns, na) = (robot.num_states(), robot.num_actions());
    let mut values = vec![0.0; ns * na];
    for entry in &file.reward {
        match entry {
            RewardEntry::State(s, v) => {
                let s = names.state("reward", s)?;
                values[s * na..(s + 1) * na].fill(*v);
            }
            RewardEntry::Pair(s, a, v) => {
                let (s, a) = (names.state("reward", s)?, names.action("reward", a)?);
                values[s * na + a] = *v;
            }
        }
    }
    let reward = RewardFunction::new(ns, na, values).map_err(|source| InstanceError::Model {
        field: "reward",
        source,
    })?;

    let mut elements = Vec::with_capacity(file.expectations.len());
    for (index, e) in file.expectations.iter().enumerate() {
        let op: Comparison =
            e.op.parse()
                .map_err(|message| InstanceError::Expectation { index, message })?;
        let states = e
            .states
            .iter()
            .map(|s| names.state("expectations", s))
            .collect::<Result<Vec<_>, _>>()?;
        let element = ExpectationElement::new(states, op, e.k).map_err(|err| InstanceError::Expectation {
            index,
            message: err.to_string(),
        })?;
        elements.push(element);
    }

    Ok(BenchmarkInstance {
        name: file.name,
        seed: file.seed,
        robot_domain: robot,
        human_domain: human,
        reward,
        ground_truth: ExpectationSet::new(elements),
        layout: file.layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{fixtures, generate, random_instance, Family};

    #[test]
    fn fixtures_round_trip() {
        for f in fixtures::all() {
            let text = serialize(&f);
            assert_eq!(deserialize(&text).unwrap(), f, "{}", f.name);
        }
    }

    #[test]
    fn grids_and_general_rewards_round_trip() {
        let g = generate(Family::Puddle, 5, 5, 2).unwrap();
        assert_eq!(deserialize(&serialize(&g)).unwrap(), g);
        let r = random_instance(4, 2, 0.9, 3);
        let text = serialize(&r);
        assert!(text.contains("\"a1\""), "general rewards are written as triples");
        assert_eq!(deserialize(&text).unwrap(), r);
    }

    #[test]
    fn missing_gamma_names_the_field() {
        let text = serialize(&fixtures::switch()).replace("\"gamma\": 0.9,", "");
        let err = deserialize(&text).unwrap_err();
        assert!(matches!(err, InstanceError::Schema { .. }));
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn substochastic_row_cites_the_pair() {
        let mut v: serde_json::Value = serde_json::from_str(&serialize(&fixtures::switch())).unwrap();
        v["robot_transitions"][0][3] = serde_json::json!(0.9);
        let err = deserialize(&v.to_string()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("robot_transitions:"), "{msg}");
        assert!(msg.contains("(s0, b1)"), "{msg}");
    }

    #[test]
    fn unknown_names_and_operators() {
        let mut v: serde_json::Value = serde_json::from_str(&serialize(&fixtures::switch())).unwrap();
        v["expectations"][0]["op"] = serde_json::json!("~");
        assert!(matches!(
            deserialize(&v.to_string()).unwrap_err(),
            InstanceError::Expectation { index: 0, .. }
        ));
        v["reward"][0][0] = serde_json::json!("nowhere");
        assert_eq!(
            deserialize(&v.to_string()).unwrap_err(),
            InstanceError::UnknownState {
                field: "reward",
                name: "nowhere".into()
            }
        );
    }
}
