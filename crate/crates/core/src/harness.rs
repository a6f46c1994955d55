//! Run records, suite execution and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{generate, table1_cells, BenchmarkInstance, Family, GenerationError, TABLE1_SEEDS};
use crate::expectation::{violated_elements, PlanningFunction};
use crate::formulation::{compute_supersets, FormulationError, FormulationParams};
use crate::ird::{run_ird, IrdError, DEFAULT_REWARD_HIGH, DEFAULT_REWARD_LOW};
use crate::mdp::{occupancy_of_policy, ModelError, TOLERANCES};
use crate::query::{run_to_completion, GroundTruthOracle, Oracle, QueryError, QuerySession, SessionStatus};

/// Per-instance soft budget; slower runs are reported unsolved.
pub const DEFAULT_BUDGET: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Ird(#[from] IrdError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Align,
    Ird,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "align" => Ok(Method::Align),
            "ird" => Ok(Method::Ird),
            _ => Err(format!("unknown method `{s}` (align or ird)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Align => "align",
            Method::Ird => "ird",
        })
    }
}

/// One row of `report.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub family: String,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub method: Method,
    /// Oracle queries raised; empty for the baseline.
    pub queries: Option<usize>,
    pub violations: usize,
    pub solved: bool,
    pub wall_time_ms: f64,
}

/// Family label and grid size of an instance, falling back to the instance
/// name and `0x0` for non-grid instances.
pub fn instance_meta(instance: &BenchmarkInstance) -> (String, usize, usize) {
    let family = instance
        .name
        .split('-')
        .next()
        .filter(|p| p.parse::<Family>().is_ok())
        .unwrap_or(&instance.name)
        .to_string();
    let (w, h) = instance.layout.as_ref().map_or((0, 0), |l| (l.width, l.height));
    (family, w, h)
}

/// An alignment run with its record.
#[derive(Clone, Debug)]
pub struct AlignRun {
    pub record: RunRecord,
    pub session: QuerySession,
    pub timed_out: bool,
}

/// Runs the query loop with `oracle` and scores the result against the
/// instance's ground truth.
pub fn run_align_with(
    instance: &BenchmarkInstance,
    oracle: &mut dyn Oracle,
    planning: PlanningFunction,
    params: FormulationParams,
    budget: Duration,
) -> Result<AlignRun, HarnessError> {
    let clock = Instant::now();
    let session = run_to_completion(
        &instance.human_domain,
        &instance.reward,
        &instance.robot_domain,
        oracle,
        planning,
        params,
    )?;
    let elapsed = clock.elapsed();
    let violations = match session.status() {
        SessionStatus::Solved { policy, .. } => {
            let occ = occupancy_of_policy(&instance.robot_domain, policy)?;
            violated_elements(&occ, &instance.ground_truth, TOLERANCES.expectation).len()
        }
        _ => 0,
    };
    let timed_out = elapsed > budget;
    let solved = matches!(session.status(), SessionStatus::Solved { .. }) && !timed_out;
    let (family, width, height) = instance_meta(instance);
    Ok(AlignRun {
        record: RunRecord {
            family,
            width,
            height,
            seed: instance.seed,
            method: Method::Align,
            queries: Some(session.num_queries()),
            violations,
            solved,
            wall_time_ms: elapsed.as_secs_f64() * 1e3,
        },
        session,
        timed_out,
    })
}

/// Alignment run answered from the instance's ground truth.
pub fn run_align(
    instance: &BenchmarkInstance,
    planning: PlanningFunction,
    params: FormulationParams,
) -> Result<AlignRun, HarnessError> {
    let mut oracle = GroundTruthOracle::new(&instance.ground_truth);
    run_align_with(instance, &mut oracle, planning, params, DEFAULT_BUDGET)
}

/// Baseline run. Superset computation is excluded from the timing; the
/// baseline counts as solved when it violates nothing.
pub fn run_ird_record(
    instance: &BenchmarkInstance,
    planning: PlanningFunction,
    params: FormulationParams,
    high: f64,
    low: f64,
) -> Result<RunRecord, HarnessError> {
    let supersets = compute_supersets(&instance.human_domain, &instance.reward, planning, &params)?;
    let out = run_ird(instance, &supersets, high, low)?;
    let (family, width, height) = instance_meta(instance);
    Ok(RunRecord {
        family,
        width,
        height,
        seed: instance.seed,
        method: Method::Ird,
        queries: None,
        violations: out.violated_elements.len(),
        solved: out.violated_elements.is_empty(),
        wall_time_ms: out.solve_time_ms,
    })
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub cells: Vec<(Family, usize, usize)>,
    pub seeds: Vec<u64>,
    /// Worker threads; `0` uses every core.
    pub jobs: usize,
    pub planning: PlanningFunction,
    pub params: FormulationParams,
    pub reward_high: f64,
    pub reward_low: f64,
    pub budget: Duration,
}

impl SuiteConfig {
    /// Every family and size of the standard suite, five seeds each.
    pub fn table1() -> Self {
        Self {
            cells: table1_cells(),
            seeds: TABLE1_SEEDS.to_vec(),
            jobs: 0,
            planning: PlanningFunction::OptimalSet,
            params: FormulationParams::default(),
            reward_high: DEFAULT_REWARD_HIGH,
            reward_low: DEFAULT_REWARD_LOW,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Records of one suite: align and baseline per instance, in cell, seed,
/// method order.
#[derive(Clone, Debug, Default)]
pub struct SuiteResult {
    pub records: Vec<RunRecord>,
    /// Names of instances whose align run exceeded the budget.
    pub timed_out: Vec<String>,
}

pub fn run_suite(config: &SuiteConfig) -> Result<SuiteResult, HarnessError> {
    let tasks: Vec<(Family, usize, usize, u64)> = config
        .cells
        .iter()
        .flat_map(|&(f, w, h)| config.seeds.iter().map(move |&s| (f, w, h, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let per_task: Vec<(Vec<RunRecord>, Option<String>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(family, w, h, seed)| {
                let inst = generate(family, w, h, seed)?;
                let mut oracle = GroundTruthOracle::new(&inst.ground_truth);
                let align = run_align_with(&inst, &mut oracle, config.planning, config.params, config.budget)?;
                let ird = run_ird_record(
                    &inst,
                    config.planning,
                    config.params,
                    config.reward_high,
                    config.reward_low,
                )?;
                let timeout = align.timed_out.then(|| inst.name.clone());
                Ok((vec![align.record, ird], timeout))
            })
            .collect::<Result<_, HarnessError>>()
    })?;
    let mut result = SuiteResult::default();
    for (records, timeout) in per_task {
        result.records.extend(records);
        result.timed_out.extend(timeout);
    }
    Ok(result)
}

/// Aggregate of one `(family, size, method)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: String,
    pub width: usize,
    pub height: usize,
    pub method: Method,
    pub runs: usize,
    pub queries_mean: Option<f64>,
    pub queries_std: Option<f64>,
    pub violations_mean: f64,
    pub violations_std: f64,
    pub solved_rate: f64,
    pub wall_time_ms_mean: f64,
    pub wall_time_ms_std: f64,
}

/// Arithmetic mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, usize, usize, Method), Vec<&RunRecord>> = BTreeMap::new();
    // keep first-seen family order rather than alphabetical
    let mut order: Vec<(String, usize, usize, Method)> = Vec::new();
    for r in records {
        let key = (r.family.clone(), r.width, r.height, r.method);
        if !cells.contains_key(&key) {
            order.push(key.clone());
        }
        cells.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &cells[&key];
            let queries: Vec<f64> = rows.iter().filter_map(|r| r.queries.map(|q| q as f64)).collect();
            let (qm, qs) = if queries.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&queries);
                (Some(m), Some(s))
            };
            let viol: Vec<f64> = rows.iter().map(|r| r.violations as f64).collect();
            let time: Vec<f64> = rows.iter().map(|r| r.wall_time_ms).collect();
            let (vm, vs) = mean_std(&viol);
            let (tm, ts) = mean_std(&time);
            SummaryRow {
                family: key.0,
                width: key.1,
                height: key.2,
                method: key.3,
                runs: rows.len(),
                queries_mean: qm,
                queries_std: qs,
                violations_mean: vm,
                violations_std: vs,
                solved_rate: rows.iter().filter(|r| r.solved).count() as f64 / rows.len() as f64,
                wall_time_ms_mean: tm,
                wall_time_ms_std: ts,
            }
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `report.csv` and `summary.csv` into `dir`, creating it if needed.
pub fn write_reports(records: &[RunRecord], dir: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let report = dir.join("report.csv");
    let mut w = csv::Writer::from_path(&report)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(&report))?;

    let summary = summarize(records);
    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for row in &summary {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(summary)
}

fn pm(mean: f64, std: f64, digits: usize) -> String {
    format!("{mean:.digits$} ± {std:.digits$}")
}

/// Aligned text table, one line per family and size with both methods side
/// by side.
pub fn pretty_table(summary: &[SummaryRow]) -> String {
    let mut rows: Vec<[String; 7]> = vec![[
        "family".into(),
        "size".into(),
        "align queries".into(),
        "align time (s)".into(),
        "align violations".into(),
        "ird time (s)".into(),
        "ird violations".into(),
    ]];
    let mut seen: Vec<(String, usize, usize)> = Vec::new();
    for r in summary {
        let key = (r.family.clone(), r.width, r.height);
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    for (family, w, h) in seen {
        let find = |m: Method| {
            summary
                .iter()
                .find(|r| r.family == family && r.width == w && r.height == h && r.method == m)
        };
        let (a, i) = (find(Method::Align), find(Method::Ird));
        let dash = || "-".to_string();
        rows.push([
            family.clone(),
            format!("{w}x{h}"),
            a.and_then(|a| Some(pm(a.queries_mean?, a.queries_std?, 2)))
                .unwrap_or_else(dash),
            a.map(|a| pm(a.wall_time_ms_mean / 1e3, a.wall_time_ms_std / 1e3, 2))
                .unwrap_or_else(dash),
            a.map(|a| pm(a.violations_mean, a.violations_std, 1))
                .unwrap_or_else(dash),
            i.map(|i| pm(i.wall_time_ms_mean / 1e3, i.wall_time_ms_std / 1e3, 3))
                .unwrap_or_else(dash),
            i.map(|i| pm(i.violations_mean, i.violations_std, 1))
                .unwrap_or_else(dash),
        ]);
    }
    let widths: Vec<usize> = (0..7)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (n, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if n == 0 {
            let _ = writeln!(
                out,
                "{}",
                widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  ")
            );
        }
    }
    out
}
