//! Dense two-phase tableau simplex.
//!
//! Problems are stated as `maximize c^T x` subject to linear rows with
//! `=`, `<=` or `>=` relations and `x >= 0`. Phase one minimizes the sum of
//! artificial variables; phase two optimizes the real objective from the
//! feasible basis phase one leaves behind. Pivoting follows Bland's rule by
//! default, which makes the solver deterministic and cycle-free.

mod mps;

pub use mps::{write_mps, MpsOptions};

use std::fmt;

use thiserror::Error;

/// Relation of a constraint row to its right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

impl Relation {
    fn flipped(self) -> Self {
        match self {
            Relation::Eq => Relation::Eq,
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Eq => "=",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective^T x` subject to `constraints`, `x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn with_objective(objective: Vec<f64>) -> Self {
        Self {
            num_vars: objective.len(),
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    /// Adds a row given as `(column, coefficient)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.num_vars];
        for &(j, c) in terms {
            coeffs[j] += c;
        }
        self.add(coeffs, relation, rhs)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars {
            return Err(LpError::Dimension {
                row: None,
                expected: self.num_vars,
                got: self.objective.len(),
            });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite { row: None });
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != self.num_vars {
                return Err(LpError::Dimension {
                    row: Some(i),
                    expected: self.num_vars,
                    got: c.coeffs.len(),
                });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFinite { row: Some(i) });
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint violation of `x`, each scaled by `1 + |rhs|`, and
    /// including negativity of any entry.
    pub fn max_scaled_residual(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let viol = match c.relation {
                Relation::Eq => (lhs - c.rhs).abs(),
                Relation::Le => (lhs - c.rhs).max(0.0),
                Relation::Ge => (c.rhs - lhs).max(0.0),
            };
            worst = worst.max(viol / (1.0 + c.rhs.abs()));
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Objective at `point`; present only when optimal.
    pub objective_value: Option<f64>,
    /// Primal solution; present only when optimal.
    pub point: Option<Vec<f64>>,
    /// Total pivots over both phases.
    pub iterations: usize,
    /// Sum of artificial variables at the end of phase one.
    pub phase_one_infeasibility: f64,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("{} has {got} coefficients, expected {expected}", row.map_or("objective".to_string(), |r| format!("row {r}")))]
    Dimension {
        row: Option<usize>,
        expected: usize,
        got: usize,
    },
    #[error("{} contains a non-finite value", row.map_or("objective".to_string(), |r| format!("row {r}")))]
    NonFinite { row: Option<usize> },
    #[error("simplex exceeded {limit} pivots without terminating")]
    IterationLimit { limit: usize },
}

/// Entering-column selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Lowest-index improving column, lowest-index leaving variable on ties.
    #[default]
    Bland,
    /// Most positive reduced cost; falls back to Bland after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub rule: PivotRule,
    /// Smallest magnitude accepted as a pivot element.
    pub pivot_tol: f64,
    /// Smallest reduced cost treated as improving.
    pub optimality_tol: f64,
    /// Phase-one infeasibility above which the problem is infeasible.
    pub feasibility_tol: f64,
    /// Solution entries below this magnitude are reported as exact zero.
    pub zero_snap: f64,
    /// Pivot cap; `None` means `50 * (num_vars + num_constraints)`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rule: PivotRule::Bland,
            pivot_tol: 1e-7,
            optimality_tol: 1e-9,
            feasibility_tol: 1e-8,
            zero_snap: 1e-9,
            max_iterations: None,
        }
    }
}

/// Solves `lp` with default options.
pub fn solve(lp: &LpProblem) -> Result<LpOutcome, LpError> {
    solve_with(lp, &SolverOptions::default())
}

pub fn solve_with(lp: &LpProblem, opts: &SolverOptions) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let limit = opts
        .max_iterations
        .unwrap_or(50 * (lp.num_vars + lp.constraints.len()).max(1));
    let mut t = Tableau::build(lp);
    let mut pivots = 0usize;

    // Phase one: maximize -(sum of artificials).
    let mut phase_one_infeasibility = 0.0;
    if t.num_artificial > 0 {
        let cost: Vec<f64> = (0..t.num_cols)
            .map(|j| if t.is_artificial(j) { -1.0 } else { 0.0 })
            .collect();
        t.set_objective(&cost);
        match t.optimize(opts, limit, &mut pivots)? {
            Phase::Optimal => {}
            // The phase-one objective is bounded above by zero.
            Phase::Unbounded => unreachable!("phase one cannot be unbounded"),
        }
        phase_one_infeasibility = -t.objective_value();
        if phase_one_infeasibility > opts.feasibility_tol {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                objective_value: None,
                point: None,
                iterations: pivots,
                phase_one_infeasibility,
            });
        }
        t.evict_artificials(opts);
    }

    let mut cost = lp.objective.clone();
    cost.resize(t.num_cols, 0.0);
    t.set_objective(&cost);
    let status = match t.optimize(opts, limit, &mut pivots)? {
        Phase::Optimal => LpStatus::Optimal,
        Phase::Unbounded => LpStatus::Unbounded,
    };
    if status == LpStatus::Unbounded {
        return Ok(LpOutcome {
            status,
            objective_value: None,
            point: None,
            iterations: pivots,
            phase_one_infeasibility,
        });
    }

    let mut point = vec![0.0; lp.num_vars];
    for (row, &var) in t.basis.iter().enumerate() {
        if var < lp.num_vars {
            point[var] = t.rhs(row);
        }
    }
    for v in &mut point {
        if v.abs() < opts.zero_snap {
            *v = 0.0;
        }
    }
    let objective_value = lp.objective_at(&point);
    Ok(LpOutcome {
        status,
        objective_value: Some(objective_value),
        point: Some(point),
        iterations: pivots,
        phase_one_infeasibility,
    })
}

enum Phase {
    Optimal,
    Unbounded,
}

/// Entries below this magnitude produced by a row update are dropped.
const DROP_TOL: f64 = 1e-13;

/// Right-hand sides below this magnitude are snapped to zero so degenerate
/// rows tie exactly in the ratio test.
const RHS_SNAP: f64 = 1e-11;

/// Number of consecutive degenerate pivots after which `Dantzig` switches to
/// Bland's rule for the remainder of the phase.
const DEGENERATE_RUN: usize = 50;

struct Tableau {
    rows: usize,
    /// Columns excluding the right-hand side.
    num_cols: usize,
    /// Row-major, `num_cols + 1` entries per row; last is the rhs.
    data: Vec<f64>,
    /// Reduced costs `c_j - c_B B^-1 A_j`, then `-c_B B^-1 b` in the last slot.
    reduced: Vec<f64>,
    basis: Vec<usize>,
    first_artificial: usize,
    num_artificial: usize,
    /// Columns barred from entering (artificials in phase two).
    barred: Vec<bool>,
}

impl Tableau {
    fn build(lp: &LpProblem) -> Self {
        let m = lp.constraints.len();
        let n = lp.num_vars;
        // Normalize every row to a nonnegative rhs.
        let rows: Vec<(f64, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    (-1.0, c.relation.flipped(), -c.rhs)
                } else {
                    (1.0, c.relation, c.rhs)
                }
            })
            .collect();
        let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let num_artificial = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let num_cols = n + num_slack + num_artificial;
        let width = num_cols + 1;
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let (mut next_slack, mut next_art) = (n, n + num_slack);
        for (i, (c, &(sign, rel, rhs))) in lp.constraints.iter().zip(&rows).enumerate() {
            let row = &mut data[i * width..(i + 1) * width];
            for (dst, &src) in row.iter_mut().zip(&c.coeffs) {
                *dst = sign * src;
            }
            row[num_cols] = rhs;
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Self {
            rows: m,
            num_cols,
            data,
            reduced: vec![0.0; width],
            basis,
            first_artificial: n + num_slack,
            num_artificial,
            barred: vec![false; num_cols],
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.num_cols + 1
    }

    #[inline]
    fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width() + col]
    }

    #[inline]
    fn rhs(&self, row: usize) -> f64 {
        self.at(row, self.num_cols)
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.first_artificial
    }

    fn objective_value(&self) -> f64 {
        -self.reduced[self.num_cols]
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width();
        self.reduced[..self.num_cols].copy_from_slice(&cost[..self.num_cols]);
        self.reduced[self.num_cols] = 0.0;
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.data[i * w..(i + 1) * w];
            for (r, &a) in self.reduced.iter_mut().zip(row) {
                *r -= cb * a;
            }
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
    }

    fn entering(&self, opts: &SolverOptions, bland: bool) -> Option<usize> {
        let candidates = (0..self.num_cols).filter(|&j| !self.barred[j] && self.reduced[j] > opts.optimality_tol);
        if bland {
            candidates.into_iter().next()
        } else {
            candidates.max_by(|&a, &b| {
                self.reduced[a]
                    .partial_cmp(&self.reduced[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
        }
    }

    /// Minimum-ratio row for entering column `q`; ties go to the row whose
    /// basic variable has the lowest index.
    fn leaving(&self, q: usize, opts: &SolverOptions) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, q);
            if a <= opts.pivot_tol {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    if (!tie && ratio < br) || (tie && self.basis[i] < self.basis[bi]) {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    fn optimize(&mut self, opts: &SolverOptions, limit: usize, pivots: &mut usize) -> Result<Phase, LpError> {
        let mut degenerate_run = 0usize;
        loop {
            let bland = opts.rule == PivotRule::Bland || degenerate_run >= DEGENERATE_RUN;
            let Some(q) = self.entering(opts, bland) else {
                return Ok(Phase::Optimal);
            };
            let Some(r) = self.leaving(q, opts) else {
                return Ok(Phase::Unbounded);
            };
            if *pivots >= limit {
                return Err(LpError::IterationLimit { limit });
            }
            if self.rhs(r).abs() <= opts.zero_snap {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q);
            *pivots += 1;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width();
        let nc = self.num_cols;
        let drop = |j: usize| if j == nc { RHS_SNAP } else { DROP_TOL };
        let inv = 1.0 / self.at(r, q);
        let mut nonzero = Vec::new();
        {
            let row = &mut self.data[r * w..(r + 1) * w];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < drop(j) {
                        *v = 0.0;
                    } else {
                        nonzero.push(j);
                    }
                }
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<(usize, f64)> = nonzero.iter().map(|&j| (j, self.data[r * w + j])).collect();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let factor = self.data[i * w + q];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            for &(j, pv) in &pivot_row {
                let v = row[j] - factor * pv;
                row[j] = if v.abs() < drop(j) { 0.0 } else { v };
            }
            row[q] = 0.0;
        }
        let factor = self.reduced[q];
        if factor != 0.0 {
            for &(j, pv) in &pivot_row {
                self.reduced[j] -= factor * pv;
            }
            self.reduced[q] = 0.0;
        }
        self.basis[r] = q;
    }

    /// Pivots zero-level artificials out of the basis and drops rows that
    /// turn out to be linearly dependent; bars artificials from re-entering.
    fn evict_artificials(&mut self, opts: &SolverOptions) {
        let mut i = 0;
        while i < self.rows {
            if !self.is_artificial(self.basis[i]) {
                i += 1;
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.first_artificial {
                let a = self.at(i, j).abs();
                if a > opts.pivot_tol && best.map_or(true, |(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            match best {
                Some((j, _)) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => self.remove_row(i),
            }
        }
        for j in self.first_artificial..self.num_cols {
            self.barred[j] = true;
        }
    }

    fn remove_row(&mut self, i: usize) {
        let w = self.width();
        let last = self.rows - 1;
        if i != last {
            let (head, tail) = self.data.split_at_mut(last * w);
            head[i * w..(i + 1) * w].copy_from_slice(&tail[..w]);
            self.basis[i] = self.basis[last];
        }
        self.data.truncate(last * w);
        self.basis.truncate(last);
        self.rows = last;
    }
}
