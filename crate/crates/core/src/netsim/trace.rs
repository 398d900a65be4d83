use std::io::{self, Write};

use crate::controller::DecreaseCause;

/// Per-flow packet accounting at the end of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowCounters {
    pub sent: u64,
    /// Packets that left the bottleneck.
    pub delivered: u64,
    /// Packets discarded by the drop-tail queue.
    pub dropped: u64,
    /// Packets still in the bottleneck queue when the run ended.
    pub queued: u64,
    /// Delivered packets whose ack had not yet reached the sender.
    pub acks_pending: u64,
    /// Dropped packets whose loss signal had not yet reached the sender.
    pub loss_signals_pending: u64,
    /// The sender's own in-flight count at the end.
    pub in_flight: u64,
}

impl FlowCounters {
    /// `sent = delivered + dropped + queued` and the sender's in-flight count
    /// matches what the network still holds for it.
    pub fn is_conserved(&self) -> bool {
        self.sent == self.delivered + self.dropped + self.queued
            && self.in_flight == self.queued + self.acks_pending + self.loss_signals_pending
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub flow_id: usize,
    pub start_time: f64,
    /// Window at each sample instant; 0 before the flow starts.
    pub cwnd: Vec<f64>,
    /// Packets delivered at the bottleneck during each sample bin.
    pub delivered: Vec<u32>,
    pub counters: FlowCounters,
    /// Base delay the flow had settled on when the run ended (seconds, offset included).
    pub final_base_delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceEventKind {
    Loss { seq: u64 },
    Decrease { cause: DecreaseCause, factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub flow_id: usize,
    pub kind: TraceEventKind,
}

/// Sampled time series and exact event logs of one run.
///
/// Sample `k` (0-based) is taken at `times[k] = (k + 1) * sample_interval`, before
/// any event scheduled at that same instant. Bin `k` covers
/// `[times[k] - sample_interval, times[k])`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub sample_interval: f64,
    pub duration: f64,
    pub capacity: f64,
    pub buffer: usize,
    pub times: Vec<f64>,
    /// Bottleneck occupancy (waiting plus in service) at each sample.
    pub queue: Vec<usize>,
    pub flows: Vec<FlowTrace>,
    pub events: Vec<TraceEvent>,
    /// Largest occupancy ever reached, sampled or not.
    pub max_queue: usize,
    /// Samples where packets were waiting on an idle link. Always zero.
    pub idle_with_backlog: u64,
}

impl SimTrace {
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_flows(&self) -> usize {
        self.flows.len()
    }

    pub fn rate(&self, flow: usize, k: usize) -> f64 {
        self.flows[flow].delivered[k] as f64 / self.sample_interval
    }

    /// Index of the bin boundary nearest to `t`, clamped to the trace.
    pub fn boundary(&self, t: f64) -> usize {
        let b = (t / self.sample_interval).round();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(self.times.len())
        }
    }

    /// Packets flow `flow` delivered between bin boundaries `[b0, b1)`.
    pub fn delivered_in(&self, flow: usize, b0: usize, b1: usize) -> u64 {
        self.flows[flow].delivered[b0..b1].iter().map(|&d| d as u64).sum()
    }

    /// Sample index whose instant is nearest to `t`.
    pub fn sample_at(&self, t: f64) -> Option<usize> {
        if self.times.is_empty() {
            return None;
        }
        let k = (t / self.sample_interval).round() as isize - 1;
        Some(k.clamp(0, self.times.len() as isize - 1) as usize)
    }

    pub fn losses(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| matches!(e.kind, TraceEventKind::Loss { .. }))
    }

    pub fn decreases(&self, cause: DecreaseCause) -> impl Iterator<Item = &TraceEvent> + '_ {
        self.events
            .iter()
            .filter(move |e| matches!(e.kind, TraceEventKind::Decrease { cause: c, .. } if c == cause))
    }

    /// Packet conservation per flow, the buffer bound, work conservation of the
    /// link and agreement of binned and counted deliveries.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.max_queue > self.buffer {
            return Err(format!("queue reached {} > buffer {}", self.max_queue, self.buffer));
        }
        if self.idle_with_backlog != 0 {
            return Err(format!("link idle with backlog at {} samples", self.idle_with_backlog));
        }
        if let Some(k) = self.queue.iter().position(|&q| q > self.buffer) {
            return Err(format!("sample {k} holds {} > buffer {}", self.queue[k], self.buffer));
        }
        for f in &self.flows {
            if !f.counters.is_conserved() {
                return Err(format!("flow {} violates packet conservation: {:?}", f.flow_id, f.counters));
            }
            let binned: u64 = f.delivered.iter().map(|&d| d as u64).sum();
            if binned > f.counters.delivered {
                return Err(format!("flow {} bins hold {binned} > {} delivered", f.flow_id, f.counters.delivered));
            }
        }
        // Each bin can carry at most one packet per service time, plus one in
        // flight across the boundary.
        let per_bin = (self.capacity * self.sample_interval).ceil() as u64 + 1;
        for k in 0..self.times.len() {
            let total: u64 = self.flows.iter().map(|f| f.delivered[k] as u64).sum();
            if total > per_bin {
                return Err(format!("bin {k} delivered {total} > link limit {per_bin}"));
            }
        }
        Ok(())
    }

    pub fn total_delivered(&self) -> u64 {
        self.flows.iter().map(|f| f.counters.delivered).sum()
    }

    /// `t,flow_id,cwnd_pkts,rate_pps,queue_pkts`, one row per sample and flow.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,flow_id,cwnd_pkts,rate_pps,queue_pkts")?;
        for (k, t) in self.times.iter().enumerate() {
            for (i, f) in self.flows.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", t, f.flow_id, f.cwnd[k], self.rate(i, k), self.queue[k])?;
            }
        }
        Ok(())
    }

    /// `t,flow_id,event,detail`.
    pub fn write_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,flow_id,event,detail")?;
        for e in &self.events {
            match e.kind {
                TraceEventKind::Loss { seq } => writeln!(w, "{},{},loss,seq={}", e.time, e.flow_id, seq)?,
                TraceEventKind::Decrease { cause, factor } => writeln!(
                    w,
                    "{},{},decrease,cause={};factor={}",
                    e.time,
                    e.flow_id,
                    cause.name(),
                    factor
                )?,
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn events_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_events_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}
