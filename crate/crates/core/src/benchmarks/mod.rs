//! Benchmark instances: micro fixtures, seeded random MDPs, the five
//! grid-world families and their JSON form.

pub mod fixtures;
mod grid;
mod io;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expectation::ExpectationSet;
use crate::formulation::FormulationError;
use crate::mdp::{Domain, ModelError, RewardFunction};

pub use grid::{generate, generate_with_attempts, GRID_GAMMA, MAX_ATTEMPTS};
pub use io::{deserialize, serialize, InstanceError};

/// A misspecification problem: the agent's true model, the user's believed
/// model, the user's reward and the user's true expectations.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkInstance {
    pub name: String,
    pub seed: u64,
    pub robot_domain: Domain,
    pub human_domain: Domain,
    pub reward: RewardFunction,
    pub ground_truth: ExpectationSet,
    pub layout: Option<Layout>,
}

impl BenchmarkInstance {
    /// Checks that both domains share spaces and that reward and
    /// expectations fit them.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.robot_domain.ensure_shared_spaces(&self.human_domain)?;
        self.reward.ensure_matches(&self.robot_domain)?;
        self.ground_truth.validate(self.robot_domain.num_states())
    }

    pub fn num_states(&self) -> usize {
        self.robot_domain.num_states()
    }

    /// Grid cell `(row, col)` of state `s`, if the instance has a layout and
    /// the state id follows the `r{row}c{col}` scheme.
    pub fn cell_of(&self, s: usize) -> Option<(usize, usize)> {
        self.layout.as_ref()?;
        parse_cell_name(self.robot_domain.state_name(s))
    }
}

pub(crate) fn parse_cell_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix('r')?;
    let (r, c) = rest.split_once('c')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

/// Rendering metadata for grid instances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<(usize, usize, CellKind)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Floor,
    Wall,
    Goal,
    Forbidden,
    Walkway,
    Puddle,
    Door,
    Start,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Walkway,
    Obstacles,
    FourRooms,
    Puddle,
    Maze,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Walkway,
        Family::Obstacles,
        Family::FourRooms,
        Family::Puddle,
        Family::Maze,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Walkway => "walkway",
            Family::Obstacles => "obstacles",
            Family::FourRooms => "four_rooms",
            Family::Puddle => "puddle",
            Family::Maze => "maze",
        }
    }

    /// Square side lengths of the standard suite.
    pub fn table1_sizes(self) -> [usize; 4] {
        match self {
            Family::Walkway | Family::Obstacles => [4, 5, 9, 11],
            Family::FourRooms => [5, 7, 9, 12],
            Family::Puddle => [5, 7, 9, 11],
            Family::Maze => [3, 5, 7, 9],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s || (s == "fourrooms" && *f == Family::FourRooms))
            .ok_or_else(|| format!("unknown family `{s}` (walkway, obstacles, four_rooms, puddle, maze)"))
    }
}

/// Seeds used per suite cell.
pub const TABLE1_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// `(family, width, height)` for every cell of the standard suite.
pub fn table1_cells() -> Vec<(Family, usize, usize)> {
    Family::ALL
        .into_iter()
        .flat_map(|f| f.table1_sizes().into_iter().map(move |n| (f, n, n)))
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("{family} {width}x{height} is too small (minimum {min}x{min})")]
    TooSmall {
        family: Family,
        width: usize,
        height: usize,
        min: usize,
    },
    #[error(
        "{family} {width}x{height} seed {seed}: no valid instance after {attempts} attempts; last rejection: {last}"
    )]
    GenerationFailed {
        family: Family,
        width: usize,
        height: usize,
        seed: u64,
        attempts: usize,
        last: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

/// A random MDP with a general `(s, a)` reward.
#[derive(Clone, Debug)]
pub struct RandomMdp {
    pub domain: Domain,
    pub reward: RewardFunction,
}

fn random_kernel(rng: &mut ChaCha8Rng, n_states: usize, n_actions: usize) -> Vec<(usize, usize, usize, f64)> {
    let mut triples = Vec::new();
    for s in 0..n_states {
        for a in 0..n_actions {
            let first = rng.gen_range(0..n_states);
            if n_states > 1 && rng.gen_bool(0.5) {
                let mut second = rng.gen_range(0..n_states - 1);
                if second >= first {
                    second += 1;
                }
                let p = rng.gen_range(0.25..=0.75);
                triples.push((s, a, first, p));
                triples.push((s, a, second, 1.0 - p));
            } else {
                triples.push((s, a, first, 1.0));
            }
        }
    }
    triples
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Each `(s, a)` moves to one or two uniformly drawn successors (split
/// probability in `[0.25, 0.75]`); rewards are uniform in `[-1, 1]`; the
/// start state is `s0`.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> RandomMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples = random_kernel(&mut rng, n_states, n_actions);
    let domain = Domain::new(names("s", n_states), names("a", n_actions), gamma, 0, triples)
        .expect("random kernel rows are stochastic");
    let values = (0..n_states * n_actions).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let reward = RewardFunction::new(n_states, n_actions, values).expect("shape matches");
    RandomMdp { domain, reward }
}

/// A small random instance whose agent model redraws the kernel rows of a
/// few `(s, a)` pairs of the user's model. The ground truth is empty.
pub fn random_instance(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> BenchmarkInstance {
    let base = random_mdp(n_states, n_actions, gamma, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let redraw = random_kernel(&mut rng, n_states, n_actions);
    let changed = rng.gen_range(1..=2.min(n_states * n_actions));
    let mut pairs: Vec<(usize, usize)> = (0..n_states)
        .flat_map(|s| (0..n_actions).map(move |a| (s, a)))
        .collect();
    for i in 0..changed {
        let j = rng.gen_range(i..pairs.len());
        pairs.swap(i, j);
    }
    let changed = &pairs[..changed];
    let robot_triples = base
        .domain
        .transition_entries()
        .filter(|(s, a, _, _)| !changed.contains(&(*s, *a)))
        .chain(redraw.into_iter().filter(|(s, a, _, _)| changed.contains(&(*s, *a))));
    let robot = Domain::new(
        base.domain.states().to_vec(),
        base.domain.actions().to_vec(),
        gamma,
        0,
        robot_triples,
    )
    .expect("redrawn rows are stochastic");
    BenchmarkInstance {
        name: format!("random-{n_states}x{n_actions}-s{seed}"),
        seed,
        robot_domain: robot,
        human_domain: base.domain,
        reward: base.reward,
        ground_truth: ExpectationSet::default(),
        layout: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_mdps_are_deterministic() {
        let a = random_mdp(5, 2, 0.9, 7);
        let b = random_mdp(5, 2, 0.9, 7);
        assert_eq!(a.domain, b.domain);
        assert_eq!(a.reward, b.reward);
        assert_ne!(random_mdp(5, 2, 0.9, 8).domain, a.domain);
    }

    #[test]
    fn random_instances_share_spaces() {
        for seed in 0..10 {
            let inst = random_instance(5, 2, 0.9, seed);
            inst.validate().unwrap();
            assert_ne!(inst.robot_domain, inst.human_domain, "seed {seed}");
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("lava".parse::<Family>().is_err());
        assert_eq!(table1_cells().len(), 20);
    }

    #[test]
    fn cell_names() {
        assert_eq!(parse_cell_name("r3c10"), Some((3, 10)));
        assert_eq!(parse_cell_name("sSafe"), None);
    }
}
