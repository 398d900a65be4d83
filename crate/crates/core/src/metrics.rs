//! Efficiency, Jain's fairness index and replication statistics.
//!
//! Long-term metrics use a measurement window that by default starts when the
//! last flow arrives and ends with the run, so every flow is active throughout.
//! Rates come from packets delivered at the bottleneck within the window.

use thiserror::Error;

use crate::netsim::{Scenario, SimTrace};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("measurement window [{0}, {1}] is empty or outside the trace")]
    EmptyWindow(f64, f64),
    #[error("no reports to aggregate")]
    NoReports,
}

/// Jain's index `(sum x)^2 / (n * sum x^2)`. `None` when every rate is zero or
/// the slice is empty.
pub fn jain<T: Scalar>(rates: &[T]) -> Option<T> {
    let n = T::from_usize(rates.len())?;
    let (sum, sum_sq) = rates
        .iter()
        .fold((T::zero(), T::zero()), |(s, s2), &x| (s + x, s2 + x * x));
    if !(sum_sq > T::zero()) {
        return None;
    }
    let f = sum * sum / (n * sum_sq);
    // Rounding can push the extremes a hair outside [1/n, 1].
    let lo = T::one() / n;
    Some(if f > T::one() { T::one() } else if f < lo { lo } else { f })
}

/// Sample mean and unbiased sample variance. A single value has variance 0.
pub fn mean_var<T: Scalar>(xs: &[T]) -> Option<(T, T)> {
    let n = xs.len();
    if n == 0 {
        return None;
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Some((xs[0], T::zero()));
    }
    let nt = T::from_usize(n)?;
    let mean = xs.iter().fold(T::zero(), |a, &x| a + x) / nt;
    let ss = xs.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean));
    Some((mean, ss / T::from_usize(n - 1)?))
}

/// A time interval `[start, end]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    /// From the last flow's arrival to the end of the run.
    pub fn all_active(scenario: &Scenario) -> Self {
        Self::new(scenario.last_start(), scenario.duration)
    }

    fn bins(&self, trace: &SimTrace) -> Result<(usize, usize), MetricsError> {
        let (b0, b1) = (trace.boundary(self.start), trace.boundary(self.end));
        if b1 <= b0 {
            Err(MetricsError::EmptyWindow(self.start, self.end))
        } else {
            Ok((b0, b1))
        }
    }
}

/// Fraction of bottleneck capacity used within `window` (whole run when `None`).
pub fn efficiency(trace: &SimTrace, scenario: &Scenario, window: Option<Window>) -> Result<f64, MetricsError> {
    let w = window.unwrap_or(Window::new(0.0, scenario.duration));
    let (b0, b1) = w.bins(trace)?;
    let delivered: u64 = (0..trace.n_flows()).map(|i| trace.delivered_in(i, b0, b1)).sum();
    let span = (b1 - b0) as f64 * trace.sample_interval;
    Ok(delivered as f64 / (scenario.capacity * span))
}

/// Average delivery rate (packets/s) of each flow over `window`. Flows that
/// deliver nothing in the window count with rate 0.
pub fn flow_rates(trace: &SimTrace, window: Window) -> Result<Vec<f64>, MetricsError> {
    let (b0, b1) = window.bins(trace)?;
    let span = (b1 - b0) as f64 * trace.sample_interval;
    Ok((0..trace.n_flows())
        .map(|i| trace.delivered_in(i, b0, b1) as f64 / span)
        .collect())
}

/// Jain's index over the flows that have started by `window.start`.
pub fn jain_in_window(trace: &SimTrace, window: Window) -> Result<Option<f64>, MetricsError> {
    let rates = flow_rates(trace, window)?;
    let active: Vec<f64> = trace
        .flows
        .iter()
        .zip(rates)
        .filter(|(f, _)| f.start_time <= window.start + 1e-9)
        .map(|(_, r)| r)
        .collect();
    Ok(jain(&active))
}

/// Sliding-window Jain index: `(window_start, F)` for each window of length
/// `window_len` advanced by `stride`. Windows with no active or no delivering
/// flow are omitted.
pub fn jain_short_term(trace: &SimTrace, window_len: f64, stride: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if trace.is_empty() || !(window_len > 0.0) || !(stride > 0.0) {
        return out;
    }
    let end = trace.times.len() as f64 * trace.sample_interval;
    let mut k = 0usize;
    loop {
        let start = k as f64 * stride;
        if start + window_len > end + 1e-9 {
            break;
        }
        if let Ok(Some(f)) = jain_in_window(trace, Window::new(start, start + window_len)) {
            out.push((start, f));
        }
        k += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<T> {
    pub eta: T,
    /// Long-term Jain index; `None` if no flow delivered in the window.
    pub jain_long: Option<T>,
    pub jain_short: Vec<(T, T)>,
    pub per_flow_rate: Vec<T>,
    pub n_flows: usize,
}

pub const SHORT_TERM_WINDOW: f64 = 5.0;
pub const SHORT_TERM_STRIDE: f64 = 1.0;

impl MetricsReport<f64> {
    /// Report over `window`, or from the last arrival to the end when `None`.
    pub fn compute(trace: &SimTrace, scenario: &Scenario, window: Option<Window>) -> Result<Self, MetricsError> {
        let w = window.unwrap_or_else(|| Window::all_active(scenario));
        let rates = flow_rates(trace, w)?;
        Ok(Self {
            eta: efficiency(trace, scenario, Some(w))?,
            jain_long: jain(&rates),
            jain_short: jain_short_term(trace, SHORT_TERM_WINDOW, SHORT_TERM_STRIDE),
            per_flow_rate: rates,
            n_flows: trace.n_flows(),
        })
    }
}

/// Mean and variance of one metric across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary<T> {
    pub mean: T,
    pub var: T,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate<T> {
    pub eta: Summary<T>,
    /// Over the reports where the index is defined; `None` if none are.
    pub jain_long: Option<Summary<T>>,
}

pub fn aggregate<T: Scalar>(reports: &[MetricsReport<T>]) -> Result<Aggregate<T>, MetricsError> {
    let etas: Vec<T> = reports.iter().map(|r| r.eta).collect();
    let (mean, var) = mean_var(&etas).ok_or(MetricsError::NoReports)?;
    let fs: Vec<T> = reports.iter().filter_map(|r| r.jain_long).collect();
    let jain_long = mean_var(&fs).map(|(mean, var)| Summary { mean, var, count: fs.len() });
    Ok(Aggregate { eta: Summary { mean, var, count: etas.len() }, jain_long })
}
