//! Expectation elements: constraints on cumulative occupancy over a state
//! subset, and the predicates that check policies against them.

use std::fmt;
use std::str::FromStr;

use crate::mdp::{occupancy_of_policy, Domain, ModelError, OccupancyVector, Policy, TOLERANCES};

/// Relational operator of an expectation element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Comparison {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
}

impl Comparison {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Gt => ">",
            Comparison::Le => "<=",
            Comparison::Ge => ">=",
            Comparison::Eq => "=",
        }
    }

    /// `lhs op k`, with `tol` absorbing numerical noise. Equality holds within
    /// `tol`; strict comparisons need a margin larger than `tol`.
    pub fn holds(self, lhs: f64, k: f64, tol: f64) -> bool {
        match self {
            Comparison::Eq => (lhs - k).abs() <= tol,
            Comparison::Gt => lhs > k + tol,
            Comparison::Lt => lhs < k - tol,
            Comparison::Ge => lhs >= k - tol,
            Comparison::Le => lhs <= k + tol,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Comparison {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "<" => Comparison::Lt,
            ">" => Comparison::Gt,
            "<=" => Comparison::Le,
            ">=" => Comparison::Ge,
            "=" | "==" => Comparison::Eq,
            other => return Err(format!("unknown comparison `{other}`")),
        })
    }
}

/// `<S_e, op, k>`: the occupancy summed over `S_e` must satisfy `op k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationElement {
    states: Vec<usize>,
    op: Comparison,
    k: f64,
}

/// The two element shapes the query procedure understands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementForm {
    /// `<{s}, =, 0>`
    Avoid(usize),
    /// `<{s}, >, 0>`
    Visit(usize),
}

impl ExpectationElement {
    pub fn new(states: impl IntoIterator<Item = usize>, op: Comparison, k: f64) -> Result<Self, ModelError> {
        let mut states: Vec<usize> = states.into_iter().collect();
        states.sort_unstable();
        states.dedup();
        if states.is_empty() {
            return Err(ModelError::EmptyExpectation);
        }
        if !(0.0..=1.0).contains(&k) {
            return Err(ModelError::ExpectationThreshold(k));
        }
        Ok(Self { states, op, k })
    }

    pub fn avoid(state: usize) -> Self {
        Self {
            states: vec![state],
            op: Comparison::Eq,
            k: 0.0,
        }
    }

    pub fn visit(state: usize) -> Self {
        Self {
            states: vec![state],
            op: Comparison::Gt,
            k: 0.0,
        }
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn op(&self) -> Comparison {
        self.op
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn form(&self) -> Option<ElementForm> {
        match (self.states.as_slice(), self.op, self.k) {
            ([s], Comparison::Eq, 0.0) => Some(ElementForm::Avoid(*s)),
            ([s], Comparison::Gt, 0.0) => Some(ElementForm::Visit(*s)),
            _ => None,
        }
    }
}

/// A collection of expectation elements (the user's expectation set).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpectationSet {
    elements: Vec<ExpectationElement>,
}

impl ExpectationSet {
    pub fn new(elements: Vec<ExpectationElement>) -> Self {
        Self { elements }
    }

    /// Avoid elements for `forbidden` followed by visit elements for `goals`.
    pub fn from_sets(forbidden: impl IntoIterator<Item = usize>, goals: impl IntoIterator<Item = usize>) -> Self {
        let mut elements: Vec<_> = goals.into_iter().map(ExpectationElement::visit).collect();
        elements.extend(forbidden.into_iter().map(ExpectationElement::avoid));
        Self { elements }
    }

    pub fn elements(&self) -> &[ExpectationElement] {
        &self.elements
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ExpectationElement> {
        self.elements.iter()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn push(&mut self, element: ExpectationElement) {
        self.elements.push(element);
    }

    /// States named by `<{s}, =, 0>` elements.
    pub fn forbidden_states(&self) -> Vec<usize> {
        self.elements
            .iter()
            .filter_map(|e| match e.form() {
                Some(ElementForm::Avoid(s)) => Some(s),
                _ => None,
            })
            .collect()
    }

    /// States named by `<{s}, >, 0>` elements.
    pub fn goal_states(&self) -> Vec<usize> {
        self.elements
            .iter()
            .filter_map(|e| match e.form() {
                Some(ElementForm::Visit(s)) => Some(s),
                _ => None,
            })
            .collect()
    }

    pub fn validate(&self, num_states: usize) -> Result<(), ModelError> {
        for e in &self.elements {
            if let Some(&s) = e.states.iter().find(|&&s| s >= num_states) {
                return Err(ModelError::ExpectationState(s));
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a ExpectationSet {
    type Item = &'a ExpectationElement;
    type IntoIter = std::slice::Iter<'a, ExpectationElement>;

    fn into_iter(self) -> Self::IntoIter {
        self.elements.iter()
    }
}

/// Whether `occ` satisfies `e`, comparing `sum_{s in S_e} x(s)` against `k`.
pub fn check_expectation(occ: &OccupancyVector, e: &ExpectationElement, tol: f64) -> bool {
    let mass: f64 = e.states.iter().map(|&s| occ.state(s)).sum();
    e.op.holds(mass, e.k, tol)
}

/// Elements of `expectations` that `occ` fails.
pub fn violated_elements<'a>(
    occ: &OccupancyVector,
    expectations: &'a ExpectationSet,
    tol: f64,
) -> Vec<&'a ExpectationElement> {
    expectations
        .iter()
        .filter(|e| !check_expectation(occ, e, tol))
        .collect()
}

/// True iff every element holds for `policy` evaluated in the robot domain.
pub fn is_expectation_aligned(
    robot: &Domain,
    policy: &Policy,
    expectations: &ExpectationSet,
) -> Result<bool, ModelError> {
    if expectations.is_empty() {
        return Ok(true);
    }
    let occ = occupancy_of_policy(robot, policy)?;
    Ok(expectations
        .iter()
        .all(|e| check_expectation(&occ, e, TOLERANCES.expectation)))
}

/// The user's model of which policies the agent may select.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlanningFunction {
    /// Every optimal policy.
    OptimalSet,
    /// Every policy whose start value strictly exceeds `threshold`.
    NoisyRational { threshold: f64 },
}

impl fmt::Display for PlanningFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanningFunction::OptimalSet => f.write_str("optimal"),
            PlanningFunction::NoisyRational { threshold } => write!(f, "noisy:{threshold}"),
        }
    }
}

impl FromStr for PlanningFunction {
    type Err = String;

    /// Parses `optimal` or `noisy:THRESH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "optimal" {
            return Ok(PlanningFunction::OptimalSet);
        }
        if let Some(rest) = s.strip_prefix("noisy:") {
            let threshold: f64 = rest.parse().map_err(|_| format!("bad noisy threshold `{rest}`"))?;
            if !threshold.is_finite() {
                return Err(format!("bad noisy threshold `{rest}`"));
            }
            return Ok(PlanningFunction::NoisyRational { threshold });
        }
        Err(format!(
            "unknown planning function `{s}` (expected `optimal` or `noisy:THRESH`)"
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::fixtures;

    #[test]
    fn tolerance_semantics() {
        assert!(Comparison::Eq.holds(5e-7, 0.0, 1e-6));
        assert!(!Comparison::Eq.holds(2e-6, 0.0, 1e-6));
        assert!(!Comparison::Gt.holds(5e-7, 0.0, 1e-6));
        assert!(Comparison::Gt.holds(1e-4, 0.0, 1e-6));
        assert!(Comparison::Ge.holds(0.5 - 1e-7, 0.5, 1e-6));
        assert!(Comparison::Le.holds(0.5 + 1e-7, 0.5, 1e-6));
        assert!(!Comparison::Lt.holds(0.5, 0.5, 1e-6));
    }

    #[test]
    fn switch_expectations_against_human_occupancies() {
        let sw = fixtures::switch();
        let b1 = occupancy_of_policy(&sw.human_domain, &Policy::Deterministic(vec![0, 0, 0])).unwrap();
        let b2 = occupancy_of_policy(&sw.human_domain, &Policy::Deterministic(vec![1, 0, 0])).unwrap();
        assert!(check_expectation(&b1, &ExpectationElement::avoid(2), 1e-6));
        assert!(check_expectation(&b1, &ExpectationElement::visit(1), 1e-6));
        assert!(!check_expectation(&b2, &ExpectationElement::visit(1), 1e-6));
    }

    #[test]
    fn alignment_in_robot_domain() {
        let sw = fixtures::switch();
        let truth = &sw.ground_truth;
        assert!(is_expectation_aligned(&sw.robot_domain, &Policy::Deterministic(vec![1, 0, 0]), truth).unwrap());
        assert!(!is_expectation_aligned(&sw.robot_domain, &Policy::Deterministic(vec![0, 0, 0]), truth).unwrap());
        assert!(is_expectation_aligned(
            &sw.robot_domain,
            &Policy::Deterministic(vec![0, 0, 0]),
            &ExpectationSet::default()
        )
        .unwrap());
    }

    #[test]
    fn element_validation_and_forms() {
        assert_eq!(
            ExpectationElement::new([], Comparison::Eq, 0.0).unwrap_err(),
            ModelError::EmptyExpectation
        );
        assert_eq!(
            ExpectationElement::new([1], Comparison::Ge, 1.5).unwrap_err(),
            ModelError::ExpectationThreshold(1.5)
        );
        let e = ExpectationElement::new([3, 3], Comparison::Eq, 0.0).unwrap();
        assert_eq!(e.form(), Some(ElementForm::Avoid(3)));
        let e = ExpectationElement::new([1, 2], Comparison::Gt, 0.0).unwrap();
        assert_eq!(e.form(), None);
        assert_eq!(ExpectationElement::visit(4).form(), Some(ElementForm::Visit(4)));
    }

    #[test]
    fn planning_function_parsing() {
        assert_eq!(
            "optimal".parse::<PlanningFunction>().unwrap(),
            PlanningFunction::OptimalSet
        );
        assert_eq!(
            "noisy:8.5".parse::<PlanningFunction>().unwrap(),
            PlanningFunction::NoisyRational { threshold: 8.5 }
        );
        assert!("noisy:abc".parse::<PlanningFunction>().is_err());
        assert!("greedy".parse::<PlanningFunction>().is_err());
    }
}
