//! Fluid model of N LEDBAT flows with per-flow base-delay errors.
//!
//! Flow `i` overestimates its base delay by `e_i` seconds and therefore sees the
//! queuing delay `q_i = max(0, Q - e_i C) / C`. Windows drift as
//!
//! ```text
//! dW_i/dt = (tau - q_i) / (R tau)
//! dQ/dt   = sum_i W_i / (R0 + Q / C) - C       clipped to [0, B]
//! ```
//!
//! where `R` is the common round-trip time of the window law and `R0` the
//! propagation round trip, so each window drains at `W_i / RTT(t)`. Integration
//! is explicit fixed-step Euler. Losses are not modelled: with `N < B / (tau C)`
//! the additive regime never fills the buffer.
//!
//! The unfairness argument: if any two windows differ when the last flow
//! arrives at `t_N`, then past
//! `t* = t_N + R * d_max(t_N) / (N - 1)` the largest pairwise window gap
//! `d_max(t)` stays strictly positive.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluidError {
    #[error("invalid fluid system: {0}")]
    Invalid(String),
    #[error("step {step} s exceeds R/10 = {limit} s")]
    StepTooLarge { step: f64, limit: f64 },
    #[error("precondition N < B/(tau C) fails: N = {n}, B/(tau C) = {bound}")]
    TooManyFlows { n: usize, bound: f64 },
    #[error("no initial window gap: d_max(t_N) = 0")]
    NoInitialGap,
    #[error("horizon t_end = {t_end} does not extend past t* = {t_star}")]
    HorizonBeforeTStar { t_end: f64, t_star: f64 },
}

/// Window floor in the fluid model, packets.
pub const WINDOW_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct FluidSystem<T> {
    /// Common round-trip time `R` of the window law, seconds.
    pub rtt: T,
    /// Round-trip propagation delay `R0`, seconds.
    pub prop_rtt: T,
    pub target_tau: T,
    /// Packets/s.
    pub capacity: T,
    /// Packets.
    pub buffer: T,
    /// Per-flow base-delay overestimate `e_i`, seconds.
    pub base_delay_error: Vec<T>,
    /// Per-flow windows at `t_start`, packets.
    pub windows: Vec<T>,
    /// Queue at `t_start`, packets.
    pub queue: T,
    pub t_start: T,
    pub step: T,
    pub window_floor: T,
}

impl<T: Scalar> FluidSystem<T> {
    /// The default packet link (800 pkt/s, 25 ms each way, 100-packet buffer,
    /// 25 ms target) at the moment the last flow arrives: queue at the first
    /// flow's target, base-delay errors `e_i = (i - 1) tau`, and common RTT
    /// `R0 + N tau` (propagation plus the late-comer's queue).
    pub fn late_comer(windows: Vec<T>, t_start: T) -> Self {
        let n = windows.len();
        let tau = T::of(0.025);
        let prop_rtt = T::of(0.05);
        let rtt = prop_rtt + T::of(n as f64) * tau;
        let capacity = T::of(800.0);
        Self {
            rtt,
            prop_rtt,
            target_tau: tau,
            capacity,
            buffer: T::of(100.0),
            base_delay_error: staggered_errors(n, tau),
            windows,
            queue: tau * capacity,
            t_start,
            step: rtt / T::of(50.0),
            window_floor: T::of(WINDOW_FLOOR),
        }
    }

    pub fn n_flows(&self) -> usize {
        self.windows.len()
    }

    /// `B / (tau C)`.
    pub fn flow_bound(&self) -> T {
        self.buffer / (self.target_tau * self.capacity)
    }

    pub fn validate(&self) -> Result<(), FluidError> {
        let bad = |m: &str| Err(FluidError::Invalid(m.to_string()));
        let n = self.n_flows();
        if n == 0 {
            return bad("at least one flow is required");
        }
        if self.base_delay_error.len() != n {
            return bad("base_delay_error and windows differ in length");
        }
        for (name, v) in [
            ("rtt", self.rtt),
            ("prop_rtt", self.prop_rtt),
            ("target_tau", self.target_tau),
            ("capacity", self.capacity),
            ("buffer", self.buffer),
            ("step", self.step),
            ("window_floor", self.window_floor),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(FluidError::Invalid(format!("{name} must be positive and finite")));
            }
        }
        let max_err = T::of((n - 1) as f64) * self.target_tau;
        // Slack for errors built by summing tau repeatedly.
        let slack = self.target_tau * T::of(1e-9);
        if self.base_delay_error.iter().any(|&e| !(e >= T::zero() && e <= max_err + slack)) {
            return bad("base-delay errors must lie in [0, (N-1) tau]");
        }
        if !(self.queue >= T::zero() && self.queue <= self.buffer) {
            return bad("queue must lie in [0, B]");
        }
        if self.windows.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return bad("windows must be positive and finite");
        }
        let limit = self.rtt / T::of(10.0);
        if self.step > limit {
            return Err(FluidError::StepTooLarge { step: self.step.to_f64_lossy(), limit: limit.to_f64_lossy() });
        }
        Ok(())
    }

    /// Queuing delay perceived by flow `i` when the queue holds `queue` packets.
    pub fn perceived_delay(&self, i: usize, queue: T) -> T {
        let excess = queue - self.base_delay_error[i] * self.capacity;
        if excess > T::zero() {
            excess / self.capacity
        } else {
            T::zero()
        }
    }

    /// Integrates from `t_start` to `t_end`, recording every step.
    pub fn integrate(&self, t_end: T) -> Result<FluidTrace<T>, FluidError> {
        self.validate()?;
        if !(t_end > self.t_start) {
            return Err(FluidError::Invalid("t_end must exceed t_start".into()));
        }
        let n = self.n_flows();
        let steps = ((t_end - self.t_start) / self.step).ceil().to_usize().unwrap_or(0);
        let mut tr = FluidTrace {
            times: Vec::with_capacity(steps + 1),
            windows: Vec::with_capacity(steps + 1),
            perceived: Vec::with_capacity(steps + 1),
            queue: Vec::with_capacity(steps + 1),
        };
        let mut w = self.windows.clone();
        let mut q = self.queue;
        let rt = self.rtt * self.target_tau;
        let record = |tr: &mut FluidTrace<T>, k: usize, w: &[T], q: T| {
            tr.times.push(self.t_start + T::of(k as f64) * self.step);
            tr.windows.push(w.to_vec());
            tr.perceived.push((0..n).map(|i| self.perceived_delay(i, q)).collect());
            tr.queue.push(q);
        };
        record(&mut tr, 0, &w, q);
        for k in 1..=steps {
            let total: T = w.iter().fold(T::zero(), |a, &x| a + x);
            let drain = total / (self.prop_rtt + q / self.capacity) - self.capacity;
            for (i, wi) in w.iter_mut().enumerate() {
                let qi = self.perceived_delay(i, q);
                let next = *wi + self.step * (self.target_tau - qi) / rt;
                *wi = if next < self.window_floor { self.window_floor } else { next };
            }
            q += self.step * drain;
            if q < T::zero() {
                q = T::zero();
            } else if q > self.buffer {
                q = self.buffer;
            }
            record(&mut tr, k, &w, q);
        }
        Ok(tr)
    }
}

/// `e_i = (i - 1) tau` for flows arriving one after another.
pub fn staggered_errors<T: Scalar>(n: usize, tau: T) -> Vec<T> {
    (0..n).map(|i| T::of(i as f64) * tau).collect()
}

/// Largest pairwise difference `max_{i,j} W_i - W_j`.
pub fn d_max_of<T: Scalar>(windows: &[T]) -> T {
    let mut it = windows.iter().copied();
    let Some(first) = it.next() else { return T::zero() };
    let (lo, hi) = it.fold((first, first), |(lo, hi), w| (lo.min(w), hi.max(w)));
    hi - lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidTrace<T> {
    pub times: Vec<T>,
    /// `windows[k][i]`: flow `i` at `times[k]`.
    pub windows: Vec<Vec<T>>,
    /// `perceived[k][i]`: queuing delay flow `i` perceives at `times[k]`, seconds.
    pub perceived: Vec<Vec<T>>,
    /// Packets.
    pub queue: Vec<T>,
}

impl<T: Scalar> FluidTrace<T> {
    /// Index of the recorded instant nearest to `t` (clamped).
    pub fn index_at(&self, t: T) -> usize {
        match self.times.iter().position(|&x| x >= t) {
            None => self.times.len() - 1,
            Some(0) => 0,
            Some(k) => {
                if t - self.times[k - 1] <= self.times[k] - t {
                    k - 1
                } else {
                    k
                }
            }
        }
    }

    /// `d_max` at the recorded instant nearest to `t`.
    pub fn d_max(&self, t: T) -> T {
        d_max_of(&self.windows[self.index_at(t)])
    }

    /// `t,flow_id,W,q_i` with 1-based flow ids; `every` thins the output.
    pub fn write_csv<W: Write>(&self, mut w: W, every: usize) -> io::Result<()> {
        writeln!(w, "t,flow_id,W,q_i")?;
        for k in (0..self.times.len()).step_by(every.max(1)) {
            for (i, wi) in self.windows[k].iter().enumerate() {
                writeln!(w, "{},{},{},{}", self.times[k], i + 1, wi, self.perceived[k][i])?;
            }
        }
        Ok(())
    }
}

/// Closed-form `t* = t_N + R * d_max(t_N) / (N - 1)`.
pub fn t_star<T: Scalar>(sys: &FluidSystem<T>, windows_at_tn: &[T]) -> Result<T, FluidError> {
    let n = windows_at_tn.len();
    check_flow_bound(sys, n)?;
    let gap = d_max_of(windows_at_tn);
    if !(gap > T::zero()) || n < 2 {
        return Err(FluidError::NoInitialGap);
    }
    Ok(sys.t_start + sys.rtt * gap / T::of((n - 1) as f64))
}

fn check_flow_bound<T: Scalar>(sys: &FluidSystem<T>, n: usize) -> Result<(), FluidError> {
    let bound = sys.flow_bound();
    if T::of(n as f64) < bound {
        Ok(())
    } else {
        Err(FluidError::TooManyFlows { n, bound: bound.to_f64_lossy() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict<T> {
    /// The proposition's hypotheses do not hold (no initial gap).
    NotApplicable { reason: String },
    Checked {
        holds: bool,
        t_star: T,
        /// First integration instant strictly after `t_star`.
        t_star_grid: T,
        /// Minimum `d_max` over the recorded instants in `(t*, t_end]`.
        min_d_max: T,
        samples_checked: usize,
    },
}

impl<T: Scalar> Verdict<T> {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Checked { holds: true, .. })
    }
}

impl<T: Scalar> fmt::Display for Verdict<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::NotApplicable { reason } => {
                writeln!(f, "applicable = false")?;
                writeln!(f, "reason = {reason}")
            }
            Verdict::Checked { holds, t_star, t_star_grid, min_d_max, samples_checked } => {
                writeln!(f, "applicable = true")?;
                writeln!(f, "holds = {holds}")?;
                writeln!(f, "t_star = {t_star}")?;
                writeln!(f, "t_star_grid = {t_star_grid}")?;
                writeln!(f, "min_d_max = {min_d_max}")?;
                writeln!(f, "samples_checked = {samples_checked}")
            }
        }
    }
}

/// Integrates `sys` to `t_end` and checks `d_max(t) > 0` at every recorded
/// instant after `t*`.
pub fn check_proposition<T: Scalar>(sys: &FluidSystem<T>, t_end: T) -> Result<(Verdict<T>, FluidTrace<T>), FluidError> {
    sys.validate()?;
    check_flow_bound(sys, sys.n_flows())?;
    let ts = match t_star(sys, &sys.windows) {
        Ok(t) => t,
        Err(FluidError::NoInitialGap) => {
            let trace = sys.integrate(t_end)?;
            let reason = "d_max(t_N) = 0: all windows equal".to_string();
            return Ok((Verdict::NotApplicable { reason }, trace));
        }
        Err(e) => return Err(e),
    };
    if !(t_end > ts) {
        return Err(FluidError::HorizonBeforeTStar { t_end: t_end.to_f64_lossy(), t_star: ts.to_f64_lossy() });
    }
    let trace = sys.integrate(t_end)?;
    let after: Vec<usize> = (0..trace.times.len()).filter(|&k| trace.times[k] > ts).collect();
    let min_d_max = after
        .iter()
        .map(|&k| d_max_of(&trace.windows[k]))
        .fold(T::infinity(), |a, b| a.min(b));
    let verdict = Verdict::Checked {
        holds: !after.is_empty() && min_d_max > T::zero(),
        t_star: ts,
        t_star_grid: after.first().map(|&k| trace.times[k]).unwrap_or(t_end),
        min_d_max,
        samples_checked: after.len(),
    };
    Ok((verdict, trace))
}
