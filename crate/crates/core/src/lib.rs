//! Detecting and repairing reward misspecification in MDPs.
//!
//! A user specifies a reward in their own (possibly wrong) model of the
//! world. This crate infers which states the user presumably expects the
//! agent to avoid or visit, by solving occupancy-measure linear programs in
//! the user's model, then looks for a policy in the agent's true model that
//! honours those expectations. Conflicts are surfaced as yes/no questions to
//! an oracle until an aligned policy is found or shown not to exist.
//!
//! Modules, bottom up:
//!
//! - [`mdp`]: domains, rewards, policies and exact occupancy computation.
//! - [`expectation`]: expectation elements and the alignment predicates.
//! - [`simplex`]: a dense two-phase simplex solver.
//! - [`formulation`]: the LPs for optimal values, superset tests and queries.
//! - [`query`]: the interactive query loop.
//! - [`benchmarks`]: grid-world generators, fixtures and JSON instances.
//! - [`ird`]: the proxy-reward baseline.
//! - [`harness`]: run records and the benchmark suite.
//! - [`oracle`]: brute-force reference implementations for small instances.

pub mod benchmarks;
pub mod expectation;
pub mod formulation;
pub mod harness;
pub mod ird;
pub mod mdp;
pub mod oracle;
pub mod query;
pub mod simplex;

pub use benchmarks::{BenchmarkInstance, Family};
pub use expectation::{Comparison, ExpectationElement, ExpectationSet, PlanningFunction};
pub use formulation::{FormulationParams, SupersetResult};
pub use mdp::{Domain, ModelError, OccupancyVector, Policy, RewardFunction};
pub use query::{Oracle, OracleAnswer, QueryKind, QuerySession, SessionStatus};
