//! Typed run, sweep and fluid descriptions built from config files.

use ledbat::controller::{ControllerConfig, Variant};
use ledbat::fluid::{self, FluidSystem, WINDOW_FLOOR};
use ledbat::metrics::Window;
use ledbat::netsim::{FlowSpec, Scenario, DEFAULT_TAU};
use ledbat::seed::{self, stream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{join, Config, ConfigError};

pub const RUN_KEYS: &[&str] = &[
    "scenario_id",
    "variant",
    "drop_prob_p",
    "beta",
    "capacity",
    "buffer",
    "prop_delay",
    "packet_size",
    "target_tau",
    "gain",
    "init_cwnd",
    "min_cwnd",
    "loss_backoff",
    "duration",
    "seed",
    "sample_interval",
    "receiver_clock_offset",
    "max_pending_events",
    "flow_starts",
    "n_flows",
    "arrival",
    "start_gap",
    "jitter",
    "t_max",
    "window_start",
    "window_end",
];

pub const SWEEP_KEYS: &[&str] = &["sweep_parameter", "sweep_values", "replications", "series_parameter", "series_values"];

pub const FLUID_KEYS: &[&str] = &[
    "scenario_id",
    "capacity",
    "buffer",
    "prop_delay",
    "target_tau",
    "fluid_windows",
    "fluid_errors",
    "fluid_queue",
    "fluid_rtt",
    "fluid_step",
    "fluid_t_start",
    "fluid_t_end",
    "fluid_window_floor",
    "csv_every",
];

pub fn sweep_keys() -> Vec<&'static str> {
    RUN_KEYS.iter().chain(SWEEP_KEYS).copied().collect()
}

/// How flow start times are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Arrival {
    Explicit(Vec<f64>),
    /// Flow `i` starts at `(i - 1) * gap`, plus uniform `[-jitter, jitter]` for
    /// every flow after the first.
    FixedGap { n: usize, gap: f64, jitter: f64 },
    /// Sorted uniform draws over `[0, t_max]`.
    Uniform { n: usize, t_max: f64 },
}

impl Arrival {
    pub fn n_flows(&self) -> usize {
        match self {
            Arrival::Explicit(v) => v.len(),
            Arrival::FixedGap { n, .. } | Arrival::Uniform { n, .. } => *n,
        }
    }

    pub fn starts(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[stream::ARRIVALS]));
        match *self {
            Arrival::Explicit(ref v) => v.clone(),
            Arrival::FixedGap { n, gap, jitter } => (0..n)
                .map(|i| {
                    let t = i as f64 * gap;
                    if i == 0 || jitter == 0.0 {
                        t
                    } else {
                        (t + rng.gen_range(-jitter..=jitter)).max(0.0)
                    }
                })
                .collect(),
            Arrival::Uniform { n, t_max } => {
                let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=t_max)).collect();
                v.sort_by(f64::total_cmp);
                v
            }
        }
    }
}

/// One simulation before its arrivals are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub scenario_id: String,
    /// Everything except the flow list.
    pub base: Scenario,
    pub arrival: Arrival,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
}

fn variant_from(cfg: &Config) -> Result<Variant<f64>, ConfigError> {
    let name = cfg.get("variant").unwrap_or("plain");
    let v = match name {
        "plain" => Variant::Plain,
        "random-pacing" => Variant::RandomPacing,
        "slow-start" => Variant::SlowStart,
        "random-drop" => Variant::RandomDrop { p: cfg.required("drop_prob_p")? },
        "multiplicative-decrease" => Variant::MultiplicativeDecrease { beta: cfg.required("beta")? },
        other => {
            return Err(ConfigError::bad(
                "variant",
                other,
                "expected plain, random-pacing, slow-start, random-drop or multiplicative-decrease",
            ))
        }
    };
    for (key, wanted) in [("drop_prob_p", "random-drop"), ("beta", "multiplicative-decrease")] {
        if let Some(val) = cfg.get(key) {
            if name != wanted {
                return Err(ConfigError::bad(key, val, format!("only used with variant = {wanted}")));
            }
        }
    }
    Ok(v)
}

fn arrival_from(cfg: &Config) -> Result<Arrival, ConfigError> {
    if let Some(starts) = cfg.list::<f64>("flow_starts")? {
        for key in ["n_flows", "arrival", "start_gap", "jitter", "t_max"] {
            if let Some(v) = cfg.get(key) {
                return Err(ConfigError::bad(key, v, "conflicts with flow_starts"));
            }
        }
        if starts.is_empty() {
            return Err(ConfigError::bad("flow_starts", "", "at least one flow is required"));
        }
        return Ok(Arrival::Explicit(starts));
    }
    let n: usize = cfg.parsed_or("n_flows", 1)?;
    if n == 0 {
        return Err(ConfigError::bad("n_flows", "0", "at least one flow is required"));
    }
    match cfg.get("arrival").unwrap_or("fixed") {
        "fixed" => {
            let gap: f64 = cfg.parsed_or("start_gap", 0.0)?;
            let jitter: f64 = cfg.parsed_or("jitter", 0.0)?;
            if !(gap >= 0.0) {
                return Err(ConfigError::bad("start_gap", &gap.to_string(), "must be non-negative"));
            }
            if !(jitter >= 0.0) {
                return Err(ConfigError::bad("jitter", &jitter.to_string(), "must be non-negative"));
            }
            Ok(Arrival::FixedGap { n, gap, jitter })
        }
        "uniform" => {
            let t_max: f64 = cfg.required("t_max")?;
            if !(t_max >= 0.0) {
                return Err(ConfigError::bad("t_max", &t_max.to_string(), "must be non-negative"));
            }
            Ok(Arrival::Uniform { n, t_max })
        }
        other => Err(ConfigError::bad("arrival", other, "expected fixed or uniform")),
    }
}

impl RunSpec {
    pub fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        let d = Scenario::default();
        let tau: f64 = cfg.parsed_or("target_tau", DEFAULT_TAU)?;
        let mut controller = ControllerConfig::new(tau, variant_from(cfg)?);
        controller.gain = cfg.parsed_or("gain", controller.gain)?;
        controller.init_cwnd = cfg.parsed_or("init_cwnd", controller.init_cwnd)?;
        controller.min_cwnd = cfg.parsed_or("min_cwnd", controller.min_cwnd)?;
        controller.loss_backoff = cfg.parsed_or("loss_backoff", controller.loss_backoff)?;
        let base = Scenario {
            capacity: cfg.parsed_or("capacity", d.capacity)?,
            buffer: cfg.parsed_or("buffer", d.buffer)?,
            prop_delay: cfg.parsed_or("prop_delay", d.prop_delay)?,
            packet_size: cfg.parsed_or("packet_size", d.packet_size)?,
            flows: Vec::new(),
            duration: cfg.parsed_or("duration", d.duration)?,
            seed: cfg.parsed_or("seed", d.seed)?,
            controller,
            sample_interval: cfg.parsed_or("sample_interval", d.sample_interval)?,
            receiver_clock_offset: cfg.parsed_or("receiver_clock_offset", d.receiver_clock_offset)?,
            max_pending_events: cfg.parsed_or("max_pending_events", d.max_pending_events)?,
        };
        let spec = RunSpec {
            scenario_id: cfg.get("scenario_id").unwrap_or("run").to_string(),
            base,
            arrival: arrival_from(cfg)?,
            window_start: cfg.parsed("window_start")?,
            window_end: cfg.parsed("window_end")?,
        };
        if let (Some(a), Some(b)) = (spec.window_start, spec.window_end) {
            if !(b > a) {
                return Err(ConfigError::bad("window_end", &b.to_string(), "must exceed window_start"));
            }
        }
        Ok(spec)
    }

    /// The concrete scenario for `seed`, arrivals included.
    pub fn scenario(&self, seed: u64) -> Scenario {
        let mut sc = self.base.clone();
        sc.seed = seed;
        sc.flows = self
            .arrival
            .starts(seed)
            .into_iter()
            .enumerate()
            .map(|(i, t)| FlowSpec::new(i + 1, t))
            .collect();
        sc
    }

    /// Measurement window for `sc`: configured bounds, else last arrival to end.
    pub fn window(&self, sc: &Scenario) -> Window {
        let all = Window::all_active(sc);
        Window::new(self.window_start.unwrap_or(all.start), self.window_end.unwrap_or(all.end))
    }

    /// Fully resolved parameters of `sc`. Fed back as a config it reproduces
    /// the run exactly.
    pub fn manifest(&self, sc: &Scenario) -> Config {
        let mut c = Config::default();
        let ctl = &sc.controller;
        c.set("scenario_id", &self.scenario_id);
        c.set("variant", ctl.variant.name());
        match ctl.variant {
            Variant::RandomDrop { p } => c.set("drop_prob_p", p),
            Variant::MultiplicativeDecrease { beta } => c.set("beta", beta),
            _ => {}
        }
        c.set("capacity", sc.capacity);
        c.set("buffer", sc.buffer);
        c.set("prop_delay", sc.prop_delay);
        c.set("packet_size", sc.packet_size);
        c.set("target_tau", ctl.target_tau);
        c.set("gain", ctl.gain);
        c.set("init_cwnd", ctl.init_cwnd);
        c.set("min_cwnd", ctl.min_cwnd);
        c.set("loss_backoff", ctl.loss_backoff);
        c.set("duration", sc.duration);
        c.set("seed", sc.seed);
        c.set("sample_interval", sc.sample_interval);
        c.set("receiver_clock_offset", sc.receiver_clock_offset);
        c.set("max_pending_events", sc.max_pending_events);
        let starts: Vec<f64> = sc.flows.iter().map(|f| f.start_time).collect();
        c.set("flow_starts", join(&starts));
        let w = self.window(sc);
        c.set("window_start", w.start);
        c.set("window_end", w.end);
        c
    }

    /// Like [`RunSpec::manifest`] but keeps the arrival model instead of
    /// drawn start times.
    pub fn template(&self) -> Config {
        let mut c = self.manifest(&self.scenario(self.base.seed));
        for k in ["flow_starts", "window_start", "window_end"] {
            c.remove(k);
        }
        match self.arrival {
            Arrival::Explicit(ref v) => c.set("flow_starts", join(v)),
            Arrival::FixedGap { n, gap, jitter } => {
                c.set("n_flows", n);
                c.set("arrival", "fixed");
                c.set("start_gap", gap);
                c.set("jitter", jitter);
            }
            Arrival::Uniform { n, t_max } => {
                c.set("n_flows", n);
                c.set("arrival", "uniform");
                c.set("t_max", t_max);
            }
        }
        if let Some(w) = self.window_start {
            c.set("window_start", w);
        }
        if let Some(w) = self.window_end {
            c.set("window_end", w);
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    DropProb,
    Beta,
    NFlows,
}

impl SweepParam {
    pub fn parse(key: &str, s: &str) -> Result<Self, ConfigError> {
        match s {
            "drop_prob_p" => Ok(SweepParam::DropProb),
            "beta" => Ok(SweepParam::Beta),
            "n_flows" => Ok(SweepParam::NFlows),
            other => Err(ConfigError::bad(key, other, "expected drop_prob_p, beta or n_flows")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::DropProb => "drop_prob_p",
            SweepParam::Beta => "beta",
            SweepParam::NFlows => "n_flows",
        }
    }

    /// Sets this parameter to `value` in `run`.
    pub fn apply(self, run: &mut RunSpec, value: f64) -> Result<(), ConfigError> {
        let ctl = &mut run.base.controller;
        match self {
            SweepParam::DropProb => ctl.variant = Variant::RandomDrop { p: value },
            SweepParam::Beta => ctl.variant = Variant::MultiplicativeDecrease { beta: value },
            SweepParam::NFlows => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(ConfigError::bad(self.name(), &value.to_string(), "must be a positive integer"));
                }
                let n = value as usize;
                match &mut run.arrival {
                    Arrival::FixedGap { n: m, .. } | Arrival::Uniform { n: m, .. } => *m = n,
                    Arrival::Explicit(_) => {
                        return Err(ConfigError::bad(
                            "sweep_parameter",
                            self.name(),
                            "needs arrival = fixed or uniform instead of flow_starts",
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub run: RunSpec,
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub replications: usize,
    /// Optional outer parameter, one curve per value.
    pub series: Option<(SweepParam, Vec<f64>)>,
}

/// One (series value, parameter value, replication) point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub series: Option<f64>,
    pub value: f64,
    pub rep: usize,
    pub seed: u64,
}

/// Replication seed: a pure function of the master seed, the cell's parameter
/// values and the replication index.
pub fn cell_seed(master: u64, series: Option<f64>, value: f64, rep: usize) -> u64 {
    match series {
        None => seed::derive(master, &[stream::REPLICATION, value.to_bits(), rep as u64]),
        Some(s) => seed::derive(master, &[stream::REPLICATION, s.to_bits(), value.to_bits(), rep as u64]),
    }
}

impl SweepSpec {
    pub fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        let run = RunSpec::from_config(cfg)?;
        let parameter = SweepParam::parse("sweep_parameter", &cfg.required::<String>("sweep_parameter")?)?;
        let values: Vec<f64> = cfg.list("sweep_values")?.unwrap_or_default();
        if values.is_empty() {
            return Err(ConfigError::Missing { key: "sweep_values".into() });
        }
        let replications: usize = cfg.parsed_or("replications", 1)?;
        if replications == 0 {
            return Err(ConfigError::bad("replications", "0", "must be at least 1"));
        }
        let series = match cfg.get("series_parameter") {
            None => {
                if let Some(v) = cfg.get("series_values") {
                    return Err(ConfigError::bad("series_values", v, "needs series_parameter"));
                }
                None
            }
            Some(s) => {
                let p = SweepParam::parse("series_parameter", s)?;
                if p == parameter {
                    return Err(ConfigError::bad("series_parameter", s, "must differ from sweep_parameter"));
                }
                let vals: Vec<f64> = cfg.list("series_values")?.unwrap_or_default();
                if vals.is_empty() {
                    return Err(ConfigError::Missing { key: "series_values".into() });
                }
                Some((p, vals))
            }
        };
        let spec = SweepSpec { run, parameter, values, replications, series };
        // Surface bad parameter values before any simulation runs.
        for cell in spec.cells(0) {
            spec.cell_run(&cell)?;
        }
        Ok(spec)
    }

    /// Cells ordered by (series value, parameter value, replication).
    pub fn cells(&self, master: u64) -> Vec<Cell> {
        let series: Vec<Option<f64>> = match &self.series {
            None => vec![None],
            Some((_, vs)) => vs.iter().map(|&v| Some(v)).collect(),
        };
        let mut out = Vec::new();
        for s in series {
            for &value in &self.values {
                for rep in 0..self.replications {
                    out.push(Cell { series: s, value, rep, seed: cell_seed(master, s, value, rep) });
                }
            }
        }
        out
    }

    pub fn cell_run(&self, cell: &Cell) -> Result<RunSpec, ConfigError> {
        let mut run = self.run.clone();
        if let (Some((p, _)), Some(s)) = (&self.series, cell.series) {
            p.apply(&mut run, s)?;
        }
        self.parameter.apply(&mut run, cell.value)?;
        Ok(run)
    }

    /// Resolved sweep description; parses back to the same spec.
    pub fn manifest(&self, master: u64) -> Config {
        let mut c = self.run.template();
        c.set("seed", master);
        c.set("sweep_parameter", self.parameter.name());
        c.set("sweep_values", join(&self.values));
        c.set("replications", self.replications);
        if let Some((p, vs)) = &self.series {
            c.set("series_parameter", p.name());
            c.set("series_values", join(vs));
        }
        c
    }
}

/// Fluid system plus horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidSpec {
    pub scenario_id: String,
    pub system: FluidSystem<f64>,
    pub t_end: f64,
    /// Write every `csv_every`-th integration step to the CSV.
    pub csv_every: usize,
}

impl FluidSpec {
    pub fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        let d = Scenario::default();
        let windows: Vec<f64> = cfg.list("fluid_windows")?.unwrap_or_else(|| vec![40.0, 45.0]);
        if windows.is_empty() {
            return Err(ConfigError::bad("fluid_windows", "", "at least one flow is required"));
        }
        let n = windows.len();
        let tau: f64 = cfg.parsed_or("target_tau", DEFAULT_TAU)?;
        let capacity: f64 = cfg.parsed_or("capacity", d.capacity)?;
        let prop_rtt = 2.0 * cfg.parsed_or("prop_delay", d.prop_delay)?;
        let rtt: f64 = cfg.parsed_or("fluid_rtt", prop_rtt + n as f64 * tau)?;
        let errors = cfg.list("fluid_errors")?.unwrap_or_else(|| fluid::staggered_errors(n, tau));
        if errors.len() != n {
            return Err(ConfigError::bad(
                "fluid_errors",
                cfg.get("fluid_errors").unwrap_or(""),
                format!("expected {n} values, one per window"),
            ));
        }
        let t_start: f64 = cfg.parsed_or("fluid_t_start", 10.0)?;
        let system = FluidSystem {
            rtt,
            prop_rtt,
            target_tau: tau,
            capacity,
            buffer: cfg.parsed_or("buffer", d.buffer as f64)?,
            base_delay_error: errors,
            windows,
            queue: cfg.parsed_or("fluid_queue", tau * capacity)?,
            t_start,
            step: cfg.parsed_or("fluid_step", rtt / 50.0)?,
            window_floor: cfg.parsed_or("fluid_window_floor", WINDOW_FLOOR)?,
        };
        let t_end: f64 = cfg.parsed_or("fluid_t_end", t_start + 60.0)?;
        let csv_every: usize = cfg.parsed_or("csv_every", 10)?;
        if csv_every == 0 {
            return Err(ConfigError::bad("csv_every", "0", "must be at least 1"));
        }
        Ok(FluidSpec {
            scenario_id: cfg.get("scenario_id").unwrap_or("fluid").to_string(),
            system,
            t_end,
            csv_every,
        })
    }
}
