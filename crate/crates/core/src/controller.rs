//! LEDBAT sender window controller.
//!
//! The controller consumes one-way delay samples (offset-polluted receiver
//! timestamp minus sender timestamp) and loss signals, and maintains a real-valued
//! congestion window in packets. Without losses the window follows the linear
//! controller
//!
//! ```text
//! W <- W + gain * (tau - q) / W        per acknowledged packet
//! W <- W * loss_backoff                 per loss (once per RTT)
//! ```
//!
//! where `q` is the current one-way delay minus the lifetime minimum (the base
//! delay). Since only differences of one-way delays are used, any constant clock
//! offset between sender and receiver cancels out.
//!
//! The [`Variant`] selects one of the fairness modifications:
//!
//! | variant | behaviour |
//! |---------|-----------|
//! | `Plain` | linear controller only |
//! | `RandomPacing` | linear controller; sends are spread randomly over the RTT |
//! | `SlowStart` | `+1` per ack until the first loss, then linear controller |
//! | `RandomDrop { p }` | linear controller, then halve with probability `p` per ack |
//! | `MultiplicativeDecrease { beta }` | increase-only linear term; `W <- beta * W` when `q > tau`, at most once per RTT |

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("controller used before the flow was started")]
    NotStarted,
    #[error("loss-flagged sample routed to on_ack; use on_loss")]
    LossOnAckPath,
}

/// Window law applied by a flow. Each run uses exactly one variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant<T> {
    Plain,
    RandomPacing,
    SlowStart,
    /// Halve the window with probability `p` on every ack.
    RandomDrop { p: T },
    /// Replace the additive decrease with `W <- beta * W`.
    MultiplicativeDecrease { beta: T },
}

impl<T: Scalar> Variant<T> {
    /// Stable identifier used in config files and CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::RandomPacing => "random-pacing",
            Variant::SlowStart => "slow-start",
            Variant::RandomDrop { .. } => "random-drop",
            Variant::MultiplicativeDecrease { .. } => "multiplicative-decrease",
        }
    }

    /// The variant's numeric parameter (`p` or `beta`), if it carries one.
    pub fn param(&self) -> Option<T> {
        match *self {
            Variant::RandomDrop { p } => Some(p),
            Variant::MultiplicativeDecrease { beta } => Some(beta),
            _ => None,
        }
    }

    pub fn is_pacing(&self) -> bool {
        matches!(self, Variant::RandomPacing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig<T> {
    /// Queuing delay target `tau`, seconds.
    pub target_tau: T,
    /// Controller gain, 1/seconds. Defaults to `1 / tau`.
    pub gain: T,
    pub variant: Variant<T>,
    /// Initial window, packets.
    pub init_cwnd: T,
    /// Window floor, packets.
    pub min_cwnd: T,
    /// Multiplicative factor applied on loss.
    pub loss_backoff: T,
}

impl<T: Scalar> ControllerConfig<T> {
    pub fn new(target_tau: T, variant: Variant<T>) -> Self {
        Self {
            target_tau,
            gain: T::one() / target_tau,
            variant,
            init_cwnd: T::of(2.0),
            min_cwnd: T::one(),
            loss_backoff: T::of(0.5),
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: &str| Err(ControllerError::InvalidConfig(m.to_string()));
        if !(self.target_tau > T::zero()) || !self.target_tau.is_finite() {
            return bad("target_tau must be positive and finite");
        }
        if !(self.gain > T::zero()) || !self.gain.is_finite() {
            return bad("gain must be positive and finite");
        }
        if !(self.min_cwnd >= T::one()) {
            return bad("min_cwnd must be at least 1 packet");
        }
        if !(self.init_cwnd >= self.min_cwnd) || !self.init_cwnd.is_finite() {
            return bad("init_cwnd must be finite and at least min_cwnd");
        }
        if !(self.loss_backoff > T::zero() && self.loss_backoff < T::one()) {
            return bad("loss_backoff must lie in (0, 1)");
        }
        match self.variant {
            // Closed interval: p = 0 and p = 1 are the degenerate endpoints used
            // to pin the variant against the plain controller.
            Variant::RandomDrop { p } if !(p >= T::zero() && p <= T::one()) => {
                bad("drop_prob_p must lie in [0, 1]")
            }
            Variant::MultiplicativeDecrease { beta } if !(beta > T::zero() && beta < T::one()) => {
                bad("beta must lie in (0, 1)")
            }
            _ => Ok(()),
        }
    }
}

/// One acknowledgement as seen by the sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySample<T> {
    /// Receiver timestamp minus sender timestamp. May be negative under clock offset.
    pub one_way_delay: T,
    /// Sender clock at ack receipt.
    pub ack_time: T,
    /// Round trip measured entirely on the sender clock (ack time minus send time).
    pub rtt: T,
    pub loss_flag: bool,
}

impl<T: Scalar> DelaySample<T> {
    pub fn new(one_way_delay: T, ack_time: T, rtt: T) -> Self {
        Self { one_way_delay, ack_time, rtt, loss_flag: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecreaseCause {
    Loss,
    RandomDrop,
    MultiplicativeDecrease,
}

impl DecreaseCause {
    pub fn name(&self) -> &'static str {
        match self {
            DecreaseCause::Loss => "loss",
            DecreaseCause::RandomDrop => "random-drop",
            DecreaseCause::MultiplicativeDecrease => "md",
        }
    }
}

/// A multiplicative window reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlEvent<T> {
    pub time: T,
    pub cause: DecreaseCause,
    pub factor: T,
    pub cwnd_before: T,
    pub cwnd_after: T,
}

#[derive(Debug, Clone)]
pub struct ControllerState<T> {
    pub initialized: bool,
    /// Congestion window in packets.
    pub cwnd: T,
    /// Lifetime minimum one-way delay; `+inf` until the first sample.
    pub base_delay: T,
    pub last_qdelay: T,
    /// Latest sender-clock round trip sample.
    pub rtt_estimate: Option<T>,
    pub in_slow_start: bool,
    pub last_decrease_time: Option<T>,
    pub rng: ChaCha8Rng,
}

impl<T: Scalar> ControllerState<T> {
    pub fn uninitialized(rng: ChaCha8Rng) -> Self {
        Self {
            initialized: false,
            cwnd: T::zero(),
            base_delay: T::infinity(),
            last_qdelay: T::zero(),
            rtt_estimate: None,
            in_slow_start: false,
            last_decrease_time: None,
            rng,
        }
    }
}

/// A single flow's controller: configuration plus evolving state.
#[derive(Debug, Clone)]
pub struct LedbatController<T> {
    pub config: ControllerConfig<T>,
    pub state: ControllerState<T>,
}

impl<T: Scalar> LedbatController<T> {
    /// Builds an unstarted controller whose random stream is derived from
    /// `(seed, flow_id)`.
    pub fn new(config: ControllerConfig<T>, seed: u64, flow_id: usize) -> Result<Self, ControllerError> {
        config.validate()?;
        Ok(Self { config, state: ControllerState::uninitialized(seed::flow_rng(seed, flow_id)) })
    }

    /// Starts the flow with `init_cwnd` (or the configured default).
    pub fn start(&mut self, init_cwnd: Option<T>) {
        let w = init_cwnd.unwrap_or(self.config.init_cwnd);
        let st = &mut self.state;
        st.initialized = true;
        st.cwnd = if w > self.config.min_cwnd { w } else { self.config.min_cwnd };
        st.in_slow_start = matches!(self.config.variant, Variant::SlowStart);
    }

    /// Convenience constructor returning an already started controller.
    pub fn started(config: ControllerConfig<T>, seed: u64, flow_id: usize) -> Result<Self, ControllerError> {
        let mut c = Self::new(config, seed, flow_id)?;
        c.start(None);
        Ok(c)
    }

    pub fn cwnd(&self) -> T {
        self.state.cwnd
    }

    pub fn rtt_estimate(&self) -> Option<T> {
        self.state.rtt_estimate
    }

    fn floor(&self, w: T) -> T {
        if w < self.config.min_cwnd {
            self.config.min_cwnd
        } else {
            w
        }
    }

    /// Linear controller step for the current queuing delay estimate.
    fn linear_step(&self, q: T) -> T {
        let st = &self.state;
        st.cwnd + self.config.gain * (self.config.target_tau - q) / st.cwnd
    }

    fn guard_open(&self, now: T) -> bool {
        match (self.state.last_decrease_time, self.state.rtt_estimate) {
            (Some(last), Some(rtt)) => now - last >= rtt,
            _ => true,
        }
    }

    fn decrease(&mut self, now: T, cause: DecreaseCause, factor: T, guarded: bool) -> ControlEvent<T> {
        let before = self.state.cwnd;
        self.state.cwnd = self.floor(before * factor);
        if guarded {
            self.state.last_decrease_time = Some(now);
        }
        ControlEvent { time: now, cause, factor, cwnd_before: before, cwnd_after: self.state.cwnd }
    }

    /// Processes one acknowledgement. Returns the window reduction it caused, if any.
    pub fn on_ack(&mut self, sample: DelaySample<T>) -> Result<Option<ControlEvent<T>>, ControllerError> {
        if !self.state.initialized {
            return Err(ControllerError::NotStarted);
        }
        if sample.loss_flag {
            return Err(ControllerError::LossOnAckPath);
        }
        let st = &mut self.state;
        if sample.one_way_delay < st.base_delay {
            st.base_delay = sample.one_way_delay;
        }
        let q = sample.one_way_delay - st.base_delay;
        st.last_qdelay = q;
        st.rtt_estimate = Some(sample.rtt);

        let tau = self.config.target_tau;
        match self.config.variant {
            Variant::Plain | Variant::RandomPacing => {
                self.state.cwnd = self.floor(self.linear_step(q));
                Ok(None)
            }
            Variant::SlowStart => {
                self.state.cwnd = if self.state.in_slow_start {
                    self.state.cwnd + T::one()
                } else {
                    self.floor(self.linear_step(q))
                };
                Ok(None)
            }
            Variant::RandomDrop { p } => {
                self.state.cwnd = self.floor(self.linear_step(q));
                let draw: f64 = self.state.rng.gen();
                if T::of(draw) < p {
                    Ok(Some(self.decrease(sample.ack_time, DecreaseCause::RandomDrop, T::of(0.5), false)))
                } else {
                    Ok(None)
                }
            }
            Variant::MultiplicativeDecrease { beta } => {
                if q > tau {
                    if self.guard_open(sample.ack_time) {
                        let ev = self.decrease(sample.ack_time, DecreaseCause::MultiplicativeDecrease, beta, true);
                        return Ok(Some(ev));
                    }
                    // Guard closed: the additive decrease is replaced, not resumed.
                    Ok(None)
                } else {
                    self.state.cwnd = self.floor(self.linear_step(q));
                    Ok(None)
                }
            }
        }
    }

    /// Processes a loss signal at sender time `now`. At most one backoff per RTT.
    pub fn on_loss(&mut self, now: T) -> Option<ControlEvent<T>> {
        if !self.state.initialized || !self.guard_open(now) {
            return None;
        }
        self.state.in_slow_start = false;
        Some(self.decrease(now, DecreaseCause::Loss, self.config.loss_backoff, true))
    }

    /// Send offsets for `n_packets` within one round of length `rtt_estimate`.
    ///
    /// Only `RandomPacing` spreads packets: the first goes out at the round start
    /// and the rest at sorted uniform offsets over `(0, rtt]`, which keeps packets
    /// in order. Every other variant sends immediately.
    pub fn pacing_schedule(&mut self, rtt_estimate: T, n_packets: usize) -> Vec<T> {
        if n_packets == 0 {
            return Vec::new();
        }
        if !self.config.variant.is_pacing() {
            return vec![T::zero(); n_packets];
        }
        let mut offsets = Vec::with_capacity(n_packets);
        offsets.push(T::zero());
        for _ in 1..n_packets {
            // gen() is uniform on [0, 1); 1 - u is uniform on (0, 1].
            let u: f64 = self.state.rng.gen();
            offsets.push(rtt_estimate * T::of(1.0 - u));
        }
        offsets[1..].sort_by(|a, b| a.partial_cmp(b).expect("finite offsets"));
        offsets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TAU: f64 = 0.025;

    fn ctl(variant: Variant<f64>, w: f64) -> LedbatController<f64> {
        let mut c = LedbatController::new(ControllerConfig::new(TAU, variant), 1, 1).unwrap();
        c.start(Some(w));
        c
    }

    /// Primes the base delay at 0.1 s so later samples carry a chosen q.
    fn prime(c: &mut LedbatController<f64>) {
        c.state.base_delay = 0.1;
    }

    fn sample(q: f64, t: f64) -> DelaySample<f64> {
        DelaySample::new(0.1 + q, t, 0.05)
    }

    #[test]
    fn plain_increase_at_zero_queue() {
        let mut c = ctl(Variant::Plain, 10.0);
        prime(&mut c);
        c.on_ack(sample(0.0, 1.0)).unwrap();
        assert_relative_eq!(c.cwnd(), 10.1, epsilon = 1e-12);
    }

    #[test]
    fn plain_zero_drift_at_target() {
        let mut c = ctl(Variant::Plain, 10.0);
        prime(&mut c);
        c.on_ack(sample(TAU, 1.0)).unwrap();
        assert_eq!(c.cwnd(), 10.0);
    }

    #[test]
    fn md_drop_when_over_target() {
        let mut c = ctl(Variant::MultiplicativeDecrease { beta: 0.6 }, 20.0);
        prime(&mut c);
        let ev = c.on_ack(sample(0.030, 1.0)).unwrap().unwrap();
        assert_relative_eq!(c.cwnd(), 12.0, epsilon = 1e-12);
        assert_eq!(ev.cause, DecreaseCause::MultiplicativeDecrease);
        assert_eq!(ev.factor, 0.6);
    }

    #[test]
    fn md_guard_suppresses_all_decrease() {
        let mut c = ctl(Variant::MultiplicativeDecrease { beta: 0.6 }, 20.0);
        prime(&mut c);
        c.on_ack(sample(0.030, 1.0)).unwrap();
        let w = c.cwnd();
        // 10 ms later, RTT estimate 50 ms: closed guard, no additive decrease either.
        assert!(c.on_ack(sample(0.030, 1.010)).unwrap().is_none());
        assert_eq!(c.cwnd(), w);
        // Once the guard reopens a second drop happens.
        assert!(c.on_ack(sample(0.030, 1.050)).unwrap().is_some());
        assert_relative_eq!(c.cwnd(), 12.0 * 0.6, epsilon = 1e-12);
    }

    #[test]
    fn md_below_target_is_increase_only() {
        let mut c = ctl(Variant::MultiplicativeDecrease { beta: 0.6 }, 10.0);
        prime(&mut c);
        c.on_ack(sample(0.0, 1.0)).unwrap();
        assert_relative_eq!(c.cwnd(), 10.1, epsilon = 1e-12);
    }

    #[test]
    fn random_drop_p_one_halves_after_zero_drift() {
        let mut c = ctl(Variant::RandomDrop { p: 1.0 }, 20.0);
        prime(&mut c);
        let ev = c.on_ack(sample(TAU, 1.0)).unwrap().unwrap();
        assert_eq!(ev.cwnd_before, 20.0);
        assert_eq!(c.cwnd(), 10.0);
    }

    #[test]
    fn loss_halves() {
        let mut c = ctl(Variant::Plain, 20.0);
        assert!(c.on_loss(1.0).is_some());
        assert_eq!(c.cwnd(), 10.0);
    }

    #[test]
    fn loss_respects_floor() {
        let mut c = ctl(Variant::Plain, 1.0);
        c.on_loss(1.0);
        assert_eq!(c.cwnd(), 1.0);
    }

    #[test]
    fn second_loss_within_rtt_ignored() {
        let mut c = ctl(Variant::Plain, 20.0);
        c.state.rtt_estimate = Some(0.050);
        assert!(c.on_loss(1.000).is_some());
        assert!(c.on_loss(1.001).is_none());
        assert_eq!(c.cwnd(), 10.0);
        assert!(c.on_loss(1.051).is_some());
        assert_eq!(c.cwnd(), 5.0);
    }

    #[test]
    fn slow_start_ramps_until_loss() {
        let mut c = ctl(Variant::SlowStart, 2.0);
        prime(&mut c);
        assert!(c.state.in_slow_start);
        for i in 0..10 {
            c.on_ack(sample(0.2, i as f64)).unwrap();
        }
        assert_eq!(c.cwnd(), 12.0);
        c.on_loss(20.0);
        assert!(!c.state.in_slow_start);
        assert_eq!(c.cwnd(), 6.0);
        c.on_ack(sample(0.0, 21.0)).unwrap();
        assert_relative_eq!(c.cwnd(), 6.0 + 1.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_unstarted_and_loss_samples() {
        let mut c = LedbatController::new(ControllerConfig::new(TAU, Variant::Plain), 1, 1).unwrap();
        assert_eq!(c.on_ack(sample(0.0, 0.0)), Err(ControllerError::NotStarted));
        c.start(None);
        let mut s = sample(0.0, 0.0);
        s.loss_flag = true;
        assert_eq!(c.on_ack(s), Err(ControllerError::LossOnAckPath));
    }

    #[test]
    fn config_validation() {
        let ok = ControllerConfig::new(TAU, Variant::MultiplicativeDecrease { beta: 0.6 });
        assert!(ok.validate().is_ok());
        for v in [
            Variant::MultiplicativeDecrease { beta: 1.0 },
            Variant::MultiplicativeDecrease { beta: 0.0 },
            Variant::RandomDrop { p: 1.5 },
            Variant::RandomDrop { p: -0.1 },
        ] {
            assert!(ControllerConfig::new(TAU, v).validate().is_err(), "{v:?}");
        }
        let mut c = ControllerConfig::new(TAU, Variant::<f64>::Plain);
        c.min_cwnd = 0.5;
        assert!(c.validate().is_err());
        let mut c = ControllerConfig::new(TAU, Variant::<f64>::Plain);
        c.init_cwnd = 0.9;
        assert!(c.validate().is_err());
        assert!(ControllerConfig::new(0.0, Variant::<f64>::Plain).validate().is_err());
    }

    #[test]
    fn pacing_schedule_shapes() {
        let mut plain = ctl(Variant::Plain, 10.0);
        assert_eq!(plain.pacing_schedule(0.1, 3), vec![0.0; 3]);
        assert_eq!(plain.pacing_schedule(0.1, 1), vec![0.0]);
        let mut paced = ctl(Variant::RandomPacing, 10.0);
        assert_eq!(paced.pacing_schedule(0.1, 1), vec![0.0]);
    }

    #[test]
    fn works_in_f32() {
        let mut c = LedbatController::<f32>::new(ControllerConfig::new(0.025f32, Variant::Plain), 1, 1).unwrap();
        c.start(Some(10.0));
        c.state.base_delay = 0.1;
        c.on_ack(DelaySample::new(0.1f32, 1.0, 0.05)).unwrap();
        assert!((c.cwnd() - 10.1).abs() < 1e-5);
    }
}
