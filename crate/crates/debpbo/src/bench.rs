//! Batches of install transactions against one or more backends, and the
//! solved / timeouts / average / deviation table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use debpbo_core::{ConstraintRef, PlanOptions, PlanStatus, Universe, Weights};

use crate::backend::{plan_with, BackendSpec};

/// Outcome of one run as recorded in the CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunStatus {
    Plan(PlanStatus),
    /// The backend itself failed (crash, malformed or invalid output).
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Plan(s) => s.as_str(),
            RunStatus::Failed => "FAILED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "OPTIMAL" => RunStatus::Plan(PlanStatus::Optimal),
            "FEASIBLE_TIMEOUT" => RunStatus::Plan(PlanStatus::FeasibleTimeout),
            "INFEASIBLE" => RunStatus::Plan(PlanStatus::Infeasible),
            "UNKNOWN" => RunStatus::Plan(PlanStatus::Unknown),
            "FAILED" => RunStatus::Failed,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub txn: u32,
    pub backend: String,
    pub status: RunStatus,
    /// Wall time in whole microseconds.
    pub wall_us: u64,
    pub vars: usize,
    pub constraints: usize,
    /// Packages installed after the transaction; 0 without a plan.
    pub installed_count: usize,
    pub objective: Option<i64>,
}

/// Two backends both proved optimality on a transaction but disagree on
/// the optimum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub txn: u32,
    pub first: (String, i64),
    pub second: (String, i64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregate {
    pub runs: usize,
    pub solved: usize,
    /// Runs that ended without a verdict: the time limit passed, or the
    /// backend failed.
    pub timeouts: usize,
    pub infeasible: usize,
    pub failed: usize,
    /// Seconds.
    pub average: f64,
    /// Population standard deviation, seconds.
    pub std_dev: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    /// Sorted by transaction, then by backend order.
    pub records: Vec<RunRecord>,
    pub backends: Vec<String>,
    pub mismatches: Vec<Mismatch>,
}

impl BenchReport {
    pub fn from_records(records: Vec<RunRecord>, backends: Vec<String>) -> Self {
        let mismatches = cross_check(&records, &backends);
        BenchReport { records, backends, mismatches }
    }

    pub fn aggregate(&self, backend: &str) -> Aggregate {
        aggregate(self.records.iter().filter(|r| r.backend == backend))
    }
}

pub fn aggregate<'a>(records: impl Iterator<Item = &'a RunRecord>) -> Aggregate {
    let mut agg = Aggregate::default();
    let mut times: Vec<u64> = Vec::new();
    for r in records {
        agg.runs += 1;
        match r.status {
            RunStatus::Plan(PlanStatus::Optimal) => agg.solved += 1,
            RunStatus::Plan(PlanStatus::Infeasible) => agg.infeasible += 1,
            RunStatus::Plan(PlanStatus::FeasibleTimeout | PlanStatus::Unknown) => agg.timeouts += 1,
            RunStatus::Failed => {
                agg.timeouts += 1;
                agg.failed += 1;
            }
        }
        times.push(r.wall_us);
    }
    if !times.is_empty() {
        let n = times.len() as f64;
        let mean_us = times.iter().map(|&t| t as f64).sum::<f64>() / n;
        let var = times.iter().map(|&t| (t as f64 - mean_us).powi(2)).sum::<f64>() / n;
        agg.average = mean_us / 1e6;
        agg.std_dev = var.sqrt() / 1e6;
    }
    agg
}

fn cross_check(records: &[RunRecord], backends: &[String]) -> Vec<Mismatch> {
    let mut optima: BTreeMap<u32, Vec<(usize, &RunRecord)>> = BTreeMap::new();
    for r in records {
        if let (RunStatus::Plan(PlanStatus::Optimal), Some(_)) = (r.status, r.objective) {
            let order = backends.iter().position(|b| *b == r.backend).unwrap_or(usize::MAX);
            optima.entry(r.txn).or_default().push((order, r));
        }
    }
    let mut out = Vec::new();
    for (txn, mut runs) in optima {
        runs.sort_by_key(|(order, _)| *order);
        let (_, first) = runs[0];
        for &(_, other) in &runs[1..] {
            if other.objective != first.objective {
                out.push(Mismatch {
                    txn,
                    first: (first.backend.clone(), first.objective.unwrap()),
                    second: (other.backend.clone(), other.objective.unwrap()),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub timeout: Duration,
    pub weights: Weights,
    /// Worker threads; at least one is used.
    pub jobs: usize,
}

/// Plans every request with every backend. Runs are spread over
/// `config.jobs` threads; each records its own wall time.
pub fn run_batch(
    universe: &Universe,
    requests: &[ConstraintRef],
    backends: &[BackendSpec],
    config: &BatchConfig,
) -> BenchReport {
    let tasks: Vec<(usize, usize)> =
        (0..requests.len()).flat_map(|t| (0..backends.len()).map(move |b| (t, b))).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<RunRecord>>> = Mutex::new(vec![None; tasks.len()]);
    let options = PlanOptions { weights: config.weights, ..PlanOptions::default() };

    thread::scope(|scope| {
        for _ in 0..config.jobs.max(1).min(tasks.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(t, b)) = tasks.get(i) else { break };
                let record = run_one(universe, &requests[t], t as u32, &backends[b], options, config.timeout);
                results.lock().unwrap()[i] = Some(record);
            });
        }
    });

    let records = results.into_inner().unwrap().into_iter().map(|r| r.expect("every task ran")).collect();
    BenchReport::from_records(records, backends.iter().map(|b| b.to_string()).collect())
}

fn run_one(
    universe: &Universe,
    request: &ConstraintRef,
    txn: u32,
    backend: &BackendSpec,
    options: PlanOptions,
    timeout: Duration,
) -> RunRecord {
    let started = Instant::now();
    let result = plan_with(universe, std::slice::from_ref(request), options, backend, timeout);
    let wall_us = started.elapsed().as_micros() as u64;
    let mut record = RunRecord {
        txn,
        backend: backend.to_string(),
        status: RunStatus::Failed,
        wall_us,
        vars: 0,
        constraints: 0,
        installed_count: 0,
        objective: None,
    };
    match result {
        Ok(plan) => {
            record.status = RunStatus::Plan(plan.status);
            record.vars = plan.stats.num_vars;
            record.constraints = plan.stats.num_constraints;
            record.objective = plan.objective_value;
            if plan.objective_value.is_some() {
                record.installed_count = plan.installed_count();
            }
        }
        Err(debpbo_core::PlanError::Encode(debpbo_core::EncodeError::UnresolvableRequest(_))) => {
            record.status = RunStatus::Plan(PlanStatus::Infeasible);
        }
        Err(_) => {}
    }
    record
}

/// `mm:ss.xx`, rounded to hundredths of a second.
pub fn format_time(seconds: f64) -> String {
    let cs = (seconds * 100.0).round() as u64;
    format!("{:02}:{:02}.{:02}", cs / 6000, cs % 6000 / 100, cs % 100)
}

pub const CSV_HEADER: &str = "txn,backend,status,wall_ms,vars,constraints,installed_count";

/// The four-row summary table, one column per backend with runs, and the
/// per-run CSV.
pub fn report(report: &BenchReport) -> (String, String) {
    let columns: Vec<(&str, Aggregate)> = report
        .backends
        .iter()
        .map(|b| (b.as_str(), report.aggregate(b)))
        .filter(|(_, a)| a.runs > 0)
        .collect();
    type Cell = Box<dyn Fn(&Aggregate) -> String>;
    let rows: [(&str, Cell); 4] = [
        ("# Solved", Box::new(|a| a.solved.to_string())),
        ("# Timeouts", Box::new(|a| a.timeouts.to_string())),
        ("Average time", Box::new(|a| format_time(a.average))),
        ("Standard deviation", Box::new(|a| format_time(a.std_dev))),
    ];
    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let widths: Vec<usize> = columns.iter().map(|(name, _)| name.len().max(8)).collect();

    let mut table = String::new();
    let _ = write!(table, "{:label_width$}", "");
    for ((name, _), w) in columns.iter().zip(&widths) {
        let _ = write!(table, "  {name:>w$}");
    }
    table.push('\n');
    for (label, cell) in &rows {
        let _ = write!(table, "{label:label_width$}");
        for ((_, agg), w) in columns.iter().zip(&widths) {
            let _ = write!(table, "  {:>w$}", cell(agg));
        }
        table.push('\n');
    }

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &report.records {
        let _ = writeln!(
            csv,
            "{},{},{},{}.{:03},{},{},{}",
            r.txn,
            csv_field(&r.backend),
            r.status.as_str(),
            r.wall_us / 1000,
            r.wall_us % 1000,
            r.vars,
            r.constraints,
            r.installed_count
        );
    }
    (table, csv)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
