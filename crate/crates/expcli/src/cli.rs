//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ledbat::fluid;

use crate::config::Config;
use crate::error::{ExpError, Result};
use crate::experiment::{sweep_keys, FluidSpec, RunSpec, SweepSpec, FLUID_KEYS, RUN_KEYS};
use crate::{plotdata, presets, runner};

#[derive(Debug, Parser)]
#[command(name = "ledbat", version, about = "LEDBAT late-comer fairness simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write trace, events, metrics and manifest.
    Run {
        #[command(flatten)]
        source: Source,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run seeded replications over a parameter grid.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Master seed; replication seeds derive from it.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's replication count.
        #[arg(long)]
        reps: Option<usize>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Turn a run or sweep output directory into per-figure tables.
    Plotdata {
        /// Directory written by `run` or `sweep`.
        input: PathBuf,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the fluid model and check the unfairness proposition.
    Fluid {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Source {
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in experiment, e.g. fig1-two-flow.
    #[arg(long)]
    pub preset: Option<String>,
}

impl Source {
    fn load(&self, known: &[&str]) -> Result<Config> {
        let text = match (&self.config, &self.preset) {
            (Some(path), _) => fs::read_to_string(path).map_err(ExpError::io(path))?,
            (None, Some(name)) => presets::preset(name)?.to_string(),
            (None, None) => return Err(ExpError::Input("give --config <file> or --preset <name>".into())),
        };
        Ok(Config::parse(&text, known)?)
    }
}

fn out_dir(out: &Option<PathBuf>, id: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| Path::new("out").join(id))
}

/// Executes `cli` and returns the text to print.
pub fn execute(cli: Cli) -> Result<String> {
    let mut msg = String::new();
    match cli.command {
        Command::Run { source, seed, out } => {
            let mut cfg = source.load(RUN_KEYS)?;
            if let Some(s) = seed {
                cfg.set("seed", s);
            }
            let spec = RunSpec::from_config(&cfg)?;
            let res = runner::execute(&spec, spec.base.seed)?;
            let dir = out_dir(&out, &spec.scenario_id);
            runner::write_run(&dir, &spec, &res)?;
            let r = &res.report;
            writeln!(msg, "scenario = {}", spec.scenario_id).ok();
            writeln!(msg, "window = [{}, {}]", res.window.start, res.window.end).ok();
            writeln!(msg, "eta = {:.4}", r.eta).ok();
            match r.jain_long {
                Some(f) => writeln!(msg, "jain_long = {f:.4}").ok(),
                None => writeln!(msg, "jain_long = undefined").ok(),
            };
            let rates: Vec<String> = r.per_flow_rate.iter().map(|x| format!("{x:.1}")).collect();
            writeln!(msg, "rates_pps = {}", rates.join(", ")).ok();
            writeln!(msg, "out = {}", dir.display()).ok();
        }
        Command::Sweep { source, seed, out, reps, jobs } => {
            let mut cfg = source.load(&sweep_keys())?;
            if let Some(s) = seed {
                cfg.set("seed", s);
            }
            if let Some(r) = reps {
                cfg.set("replications", r);
            }
            let spec = SweepSpec::from_config(&cfg)?;
            let master = spec.run.base.seed;
            let rows = runner::run_sweep(&spec, master, jobs.max(1))?;
            let dir = out_dir(&out, &spec.run.scenario_id);
            let agg = runner::write_sweep(&dir, &spec, master, &rows)?;
            msg.push_str(&runner::aggregate_csv(&agg));
            writeln!(msg, "out = {}", dir.display()).ok();
        }
        Command::Plotdata { input, out } => {
            let dir = out.unwrap_or_else(|| input.clone());
            for f in plotdata::emit(&input, &dir)? {
                writeln!(msg, "{}", f.display()).ok();
            }
        }
        Command::Fluid { source, out } => {
            let spec = FluidSpec::from_config(&source.load(FLUID_KEYS)?)?;
            let (verdict, trace) = fluid::check_proposition(&spec.system, spec.t_end)?;
            write!(msg, "{verdict}").ok();
            if let Some(dir) = out {
                runner::create_dir(&dir)?;
                let path = dir.join("fluid.csv");
                let mut buf = Vec::new();
                trace.write_csv(&mut buf, spec.csv_every).map_err(ExpError::io(&path))?;
                fs::write(&path, buf).map_err(ExpError::io(&path))?;
                writeln!(msg, "out = {}", dir.display()).ok();
            }
        }
    }
    Ok(msg)
}
