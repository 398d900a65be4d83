use crate::controller::{ControllerConfig, Variant};

use super::SimError;

/// Default link: 800 packets/s, 25 ms one-way propagation, 100-packet buffer,
/// 25 ms target. At this capacity the target corresponds to 20 queued packets.
pub const DEFAULT_CAPACITY: f64 = 800.0;
pub const DEFAULT_PROP_DELAY: f64 = 0.025;
pub const DEFAULT_BUFFER: usize = 100;
pub const DEFAULT_PACKET_SIZE: u32 = 1500;
pub const DEFAULT_TAU: f64 = 0.025;
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 0.1;
pub const DEFAULT_MAX_PENDING_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    /// 1-based ordinal; must equal the flow's position in the list plus one.
    pub flow_id: usize,
    pub start_time: f64,
    /// Overrides the controller's `init_cwnd` when set.
    pub initial_cwnd: Option<f64>,
}

impl FlowSpec {
    pub fn new(flow_id: usize, start_time: f64) -> Self {
        Self { flow_id, start_time, initial_cwnd: None }
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Bottleneck capacity, packets/s.
    pub capacity: f64,
    /// Drop-tail buffer size in packets, including the packet in service.
    pub buffer: usize,
    /// One-way propagation delay per direction, seconds.
    pub prop_delay: f64,
    /// Bytes per packet; used only for bit-rate conversion.
    pub packet_size: u32,
    pub flows: Vec<FlowSpec>,
    pub duration: f64,
    pub seed: u64,
    pub controller: ControllerConfig<f64>,
    pub sample_interval: f64,
    /// Constant added to every receiver timestamp.
    pub receiver_clock_offset: f64,
    /// Runaway guard on the pending event heap.
    pub max_pending_events: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            capacity: DEFAULT_CAPACITY,
            buffer: DEFAULT_BUFFER,
            prop_delay: DEFAULT_PROP_DELAY,
            packet_size: DEFAULT_PACKET_SIZE,
            flows: vec![FlowSpec::new(1, 0.0)],
            duration: 30.0,
            seed: 1,
            controller: ControllerConfig::new(DEFAULT_TAU, Variant::Plain),
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            receiver_clock_offset: 0.0,
            max_pending_events: DEFAULT_MAX_PENDING_EVENTS,
        }
    }
}

impl Scenario {
    pub fn with_flows_at(mut self, starts: &[f64]) -> Self {
        self.flows = starts.iter().enumerate().map(|(i, &t)| FlowSpec::new(i + 1, t)).collect();
        self
    }

    pub fn with_variant(mut self, variant: Variant<f64>) -> Self {
        self.controller.variant = variant;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_flows(&self) -> usize {
        self.flows.len()
    }

    /// Start time of the last flow to arrive.
    pub fn last_start(&self) -> f64 {
        self.flows.iter().map(|f| f.start_time).fold(0.0, f64::max)
    }

    /// Queue size (packets) that corresponds to the target delay.
    pub fn target_queue(&self) -> f64 {
        self.controller.target_tau * self.capacity
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if !(self.capacity > 0.0) || !self.capacity.is_finite() {
            return bad("capacity must be positive".into());
        }
        if self.buffer < 1 {
            return bad("buffer must hold at least one packet".into());
        }
        if !(self.prop_delay >= 0.0) || !self.prop_delay.is_finite() {
            return bad("prop_delay must be non-negative".into());
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return bad("duration must be non-negative".into());
        }
        if !(self.sample_interval > 0.0) {
            return bad("sample_interval must be positive".into());
        }
        if !self.receiver_clock_offset.is_finite() {
            return bad("receiver_clock_offset must be finite".into());
        }
        if self.max_pending_events == 0 {
            return bad("max_pending_events must be positive".into());
        }
        self.controller
            .validate()
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if self.flows.is_empty() {
            return bad("at least one flow is required".into());
        }
        let mut prev = 0.0;
        for (i, f) in self.flows.iter().enumerate() {
            if f.flow_id != i + 1 {
                return bad(format!("flow {} has flow_id {}, expected {}", i + 1, f.flow_id, i + 1));
            }
            if !(f.start_time >= prev) {
                return bad(format!("flow {} start time {} precedes flow {}", f.flow_id, f.start_time, i));
            }
            if self.duration > 0.0 && !(f.start_time < self.duration) {
                return bad(format!("flow {} starts at {} outside [0, duration)", f.flow_id, f.start_time));
            }
            if let Some(w) = f.initial_cwnd {
                if !(w >= self.controller.min_cwnd) || !w.is_finite() {
                    return bad(format!("flow {} initial_cwnd below min_cwnd", f.flow_id));
                }
            }
            prev = f.start_time;
        }
        Ok(())
    }
}

/// `base` with `n` flows starting at `0, gap, 2 gap, ...`.
pub fn staggered_scenario(n: usize, gap: f64, base: &Scenario) -> Scenario {
    let starts: Vec<f64> = (0..n.max(1)).map(|i| i as f64 * gap).collect();
    base.clone().with_flows_at(&starts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staggered_starts() {
        let s = staggered_scenario(3, 5.0, &Scenario::default());
        let starts: Vec<f64> = s.flows.iter().map(|f| f.start_time).collect();
        assert_eq!(starts, vec![0.0, 5.0, 10.0]);
        let ids: Vec<usize> = s.flows.iter().map(|f| f.flow_id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        let one = staggered_scenario(1, 5.0, &Scenario::default());
        assert_eq!(one.flows, vec![FlowSpec::new(1, 0.0)]);
    }

    #[test]
    fn validation_errors() {
        let base = Scenario::default();
        assert!(base.validate().is_ok());
        let mut s = base.clone();
        s.capacity = 0.0;
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.buffer = 0;
        assert!(s.validate().is_err());
        let s = base.clone().with_flows_at(&[5.0, 1.0]);
        assert!(s.validate().is_err());
        let s = base.clone().with_flows_at(&[]);
        assert!(s.validate().is_err());
        let s = base.clone().with_flows_at(&[0.0, 30.0]);
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.duration = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn default_target_is_twenty_packets() {
        assert!((Scenario::default().target_queue() - 20.0).abs() < 1e-9);
    }
}
