//! Executing runs and sweeps and writing their output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ledbat::metrics::{self, MetricsReport, Summary, Window};
use ledbat::netsim::{self, Scenario, SimTrace};
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{ExpError, Result};
use crate::experiment::{Cell, RunSpec, SweepSpec};

pub const METRICS_HEADER: &str = "scenario_id,variant,param,seed,eta,jain_long";
pub const RUNS_HEADER: &str = "scenario_id,variant,param,seed,eta,jain_long,n_flows,rep";
pub const AGGREGATE_HEADER: &str =
    "scenario_id,variant,param,n_flows,count,eta_mean,eta_var,jain_long_mean,jain_long_var";

pub struct RunOutput {
    pub scenario: Scenario,
    pub trace: SimTrace,
    pub window: Window,
    pub report: MetricsReport<f64>,
    pub manifest: Config,
}

/// Runs `spec` with `seed`; fails if the trace breaks a simulator invariant.
pub fn execute(spec: &RunSpec, seed: u64) -> Result<RunOutput> {
    let scenario = spec.scenario(seed);
    let trace = netsim::run(&scenario)?;
    trace.check_invariants().map_err(ExpError::Invariant)?;
    let window = spec.window(&scenario);
    let report = MetricsReport::compute(&trace, &scenario, Some(window))?;
    let manifest = spec.manifest(&scenario);
    Ok(RunOutput { scenario, trace, window, report, manifest })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One line of `metrics.csv` / `runs.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub scenario_id: String,
    pub variant: String,
    pub param: Option<f64>,
    pub seed: u64,
    pub eta: f64,
    pub jain_long: Option<f64>,
    pub n_flows: usize,
    pub rep: usize,
}

impl RunRow {
    pub fn new(spec: &RunSpec, out: &RunOutput, rep: usize) -> Self {
        let v = out.scenario.controller.variant;
        RunRow {
            scenario_id: spec.scenario_id.clone(),
            variant: v.name().to_string(),
            param: v.param(),
            seed: out.scenario.seed,
            eta: out.report.eta,
            jain_long: out.report.jain_long,
            n_flows: out.scenario.n_flows(),
            rep,
        }
    }

    pub fn metrics_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.scenario_id,
            self.variant,
            opt(self.param),
            self.seed,
            self.eta,
            opt(self.jain_long)
        )
    }

    pub fn runs_line(&self) -> String {
        format!("{},{},{}", self.metrics_line(), self.n_flows, self.rep)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(ExpError::io(path))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(ExpError::io(dir))
}

pub fn write_run(dir: &Path, spec: &RunSpec, out: &RunOutput) -> Result<()> {
    create_dir(dir)?;
    write(&dir.join("trace.csv"), &out.trace.to_csv_string())?;
    write(&dir.join("events.csv"), &out.trace.events_csv_string())?;
    let row = RunRow::new(spec, out, 0);
    write(&dir.join("metrics.csv"), &format!("{METRICS_HEADER}\n{}\n", row.metrics_line()))?;
    let mut short = String::from("window_start,jain\n");
    for (t, f) in &out.report.jain_short {
        writeln!(short, "{t},{f}").expect("writing to a String cannot fail");
    }
    write(&dir.join("short_term.csv"), &short)?;
    write(&dir.join("manifest.conf"), &out.manifest.to_string())
}

fn run_cell(spec: &SweepSpec, cell: &Cell) -> Result<RunRow> {
    let run = spec.cell_run(cell)?;
    let out = execute(&run, cell.seed)?;
    Ok(RunRow::new(&run, &out, cell.rep))
}

/// Runs every cell of `spec` on `jobs` worker threads. Rows come back in cell
/// order whatever the thread count.
pub fn run_sweep(spec: &SweepSpec, master: u64, jobs: usize) -> Result<Vec<RunRow>> {
    let cells = spec.cells(master);
    if jobs <= 1 {
        return cells.iter().map(|c| run_cell(spec, c)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExpError::Input(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| cells.par_iter().map(|c| run_cell(spec, c)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scenario_id: String,
    pub variant: String,
    pub param: Option<f64>,
    pub n_flows: usize,
    pub eta: Summary<f64>,
    pub jain_long: Option<Summary<f64>>,
}

impl AggregateRow {
    pub fn line(&self) -> String {
        let (fm, fv) = match self.jain_long {
            Some(s) => (s.mean.to_string(), s.var.to_string()),
            None => (String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scenario_id,
            self.variant,
            opt(self.param),
            self.n_flows,
            self.eta.count,
            self.eta.mean,
            self.eta.var,
            fm,
            fv
        )
    }
}

/// Groups rows by (variant, param, n_flows) in order of first appearance and
/// aggregates each group.
pub fn aggregate_rows(rows: &[RunRow]) -> Result<Vec<AggregateRow>> {
    let mut groups: Vec<(&RunRow, Vec<MetricsReport<f64>>)> = Vec::new();
    for r in rows {
        let report = MetricsReport {
            eta: r.eta,
            jain_long: r.jain_long,
            jain_short: Vec::new(),
            per_flow_rate: Vec::new(),
            n_flows: r.n_flows,
        };
        let same = |g: &RunRow| g.variant == r.variant && g.param == r.param && g.n_flows == r.n_flows;
        match groups.iter_mut().find(|(g, _)| same(g)) {
            Some((_, v)) => v.push(report),
            None => groups.push((r, vec![report])),
        }
    }
    groups
        .into_iter()
        .map(|(head, reports)| {
            let a = metrics::aggregate(&reports)?;
            Ok(AggregateRow {
                scenario_id: head.scenario_id.clone(),
                variant: head.variant.clone(),
                param: head.param,
                n_flows: head.n_flows,
                eta: a.eta,
                jain_long: a.jain_long,
            })
        })
        .collect()
}

pub fn runs_csv(rows: &[RunRow]) -> String {
    let mut s = format!("{RUNS_HEADER}\n");
    for r in rows {
        s.push_str(&r.runs_line());
        s.push('\n');
    }
    s
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        s.push_str(&r.line());
        s.push('\n');
    }
    s
}

pub fn write_sweep(dir: &Path, spec: &SweepSpec, master: u64, rows: &[RunRow]) -> Result<Vec<AggregateRow>> {
    create_dir(dir)?;
    let agg = aggregate_rows(rows)?;
    write(&dir.join("runs.csv"), &runs_csv(rows))?;
    write(&dir.join("aggregate.csv"), &aggregate_csv(&agg))?;
    write(&dir.join("manifest.conf"), &spec.manifest(master).to_string())?;
    Ok(agg)
}
