//! Deterministic discrete-event simulator: N LEDBAT senders sharing one FIFO
//! drop-tail bottleneck.
//!
//! Topology: every sender feeds the bottleneck directly (the queue sits at the
//! senders' shared uplink). A packet leaving the bottleneck reaches its
//! receiver after `prop_delay`, and the ack returns after another `prop_delay`
//! on an uncongested, lossless reverse path. A dropped packet produces a loss
//! signal at the instant its ack would have arrived had it been queued.
//!
//! The event heap is ordered by `(time, flow_id, seq, kind, insertion order)`,
//! so a scenario (seed included) fully determines the trace.

mod scenario;
pub mod time;
mod trace;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use thiserror::Error;

use crate::controller::{ControlEvent, DelaySample, LedbatController};

pub use scenario::{
    staggered_scenario, FlowSpec, Scenario, DEFAULT_BUFFER, DEFAULT_CAPACITY, DEFAULT_MAX_PENDING_EVENTS,
    DEFAULT_PACKET_SIZE, DEFAULT_PROP_DELAY, DEFAULT_SAMPLE_INTERVAL, DEFAULT_TAU,
};
pub use time::SimTime;
pub use trace::{FlowCounters, FlowTrace, SimTrace, TraceEvent, TraceEventKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("event queue exceeded {limit} pending events at t = {time} s")]
    Runaway { limit: usize, time: f64 },
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    FlowStart,
    Departure,
    Ack { tx: SimTime, rx_stamp: i64 },
    LossSignal,
    PacingRound,
    PacedSend,
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::Departure => 0,
            EventKind::Ack { .. } => 1,
            EventKind::LossSignal => 2,
            EventKind::FlowStart => 3,
            EventKind::PacingRound => 4,
            EventKind::PacedSend => 5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: SimTime,
    flow: u32,
    seq: u64,
    counter: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (SimTime, u32, u64, u8, u64) {
        (self.time, self.flow, self.seq, self.kind.rank(), self.counter)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so BinaryHeap pops the earliest event.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    flow: u32,
    seq: u64,
    tx_time: SimTime,
}

struct Flow {
    ctrl: LedbatController<f64>,
    spec: FlowSpec,
    started: bool,
    next_seq: u64,
    in_flight: u64,
    /// Paced transmissions that found the window full and wait for an ack.
    paced_backlog: u64,
    pacing_round: u64,
    counters: FlowCounters,
    bin: u32,
    trace: FlowTrace,
}

impl Flow {
    /// In-flight limit: whole packets of the current window.
    fn allowance(&self) -> u64 {
        self.ctrl.cwnd().floor() as u64
    }
}

struct Sim<'a> {
    sc: &'a Scenario,
    now: SimTime,
    heap: BinaryHeap<Event>,
    counter: u64,
    queue: VecDeque<Packet>,
    link_busy: bool,
    head_finish: SimTime,
    service: SimTime,
    prop: SimTime,
    offset_ticks: i64,
    flows: Vec<Flow>,
    out: SimTrace,
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario) -> Result<Self, SimError> {
        let flows = sc
            .flows
            .iter()
            .map(|spec| {
                let ctrl = LedbatController::new(sc.controller, sc.seed, spec.flow_id)
                    .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
                Ok(Flow {
                    ctrl,
                    spec: spec.clone(),
                    started: false,
                    next_seq: 0,
                    in_flight: 0,
                    paced_backlog: 0,
                    pacing_round: 0,
                    counters: FlowCounters::default(),
                    bin: 0,
                    trace: FlowTrace {
                        flow_id: spec.flow_id,
                        start_time: spec.start_time,
                        cwnd: Vec::new(),
                        delivered: Vec::new(),
                        counters: FlowCounters::default(),
                        final_base_delay: f64::INFINITY,
                    },
                })
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        let off = sc.receiver_clock_offset * time::TICKS_PER_SECOND as f64;
        Ok(Self {
            sc,
            now: SimTime::ZERO,
            heap: BinaryHeap::new(),
            counter: 0,
            queue: VecDeque::with_capacity(sc.buffer),
            link_busy: false,
            head_finish: SimTime::ZERO,
            // Rounded up: the simulated link is never faster than `capacity`.
            service: SimTime::from_secs_ceil(1.0 / sc.capacity),
            prop: SimTime::from_secs(sc.prop_delay),
            offset_ticks: off.round() as i64,
            flows,
            out: SimTrace {
                sample_interval: sc.sample_interval,
                duration: sc.duration,
                capacity: sc.capacity,
                buffer: sc.buffer,
                ..SimTrace::default()
            },
        })
    }

    fn schedule(&mut self, time: SimTime, flow: usize, seq: u64, kind: EventKind) -> Result<(), SimError> {
        if self.heap.len() >= self.sc.max_pending_events {
            return Err(SimError::Runaway { limit: self.sc.max_pending_events, time: self.now.as_secs() });
        }
        self.counter += 1;
        self.heap.push(Event { time, flow: flow as u32, seq, counter: self.counter, kind });
        Ok(())
    }

    fn log_decrease(&mut self, flow: usize, ev: Option<ControlEvent<f64>>) {
        if let Some(ev) = ev {
            self.out.events.push(TraceEvent {
                time: self.now.as_secs(),
                flow_id: self.flows[flow].spec.flow_id,
                kind: TraceEventKind::Decrease { cause: ev.cause, factor: ev.factor },
            });
        }
    }

    fn transmit(&mut self, flow: usize) -> Result<(), SimError> {
        let now = self.now;
        let f = &mut self.flows[flow];
        let seq = f.next_seq;
        f.next_seq += 1;
        f.in_flight += 1;
        f.counters.sent += 1;

        if self.queue.len() >= self.sc.buffer {
            f.counters.dropped += 1;
            let flow_id = f.spec.flow_id;
            self.out.events.push(TraceEvent { time: now.as_secs(), flow_id, kind: TraceEventKind::Loss { seq } });
            // When its ack would have come back had it joined the tail.
            let tail_finish = self.head_finish + SimTime(self.service.0 * (self.queue.len() as u64 - 1));
            let signal = tail_finish + self.service + self.prop + self.prop;
            return self.schedule(signal, flow, seq, EventKind::LossSignal);
        }

        self.queue.push_back(Packet { flow: flow as u32, seq, tx_time: now });
        self.out.max_queue = self.out.max_queue.max(self.queue.len());
        if !self.link_busy {
            self.link_busy = true;
            self.head_finish = now + self.service;
            self.schedule(self.head_finish, flow, seq, EventKind::Departure)?;
        }
        Ok(())
    }

    /// Window-clocked sending for non-paced variants.
    fn pump(&mut self, flow: usize) -> Result<(), SimError> {
        let limit = self.flows[flow].allowance();
        while self.flows[flow].in_flight < limit {
            self.transmit(flow)?;
        }
        Ok(())
    }

    /// Releases paced transmissions that were blocked by the window.
    fn drain_backlog(&mut self, flow: usize) -> Result<(), SimError> {
        let limit = self.flows[flow].allowance();
        while self.flows[flow].paced_backlog > 0 && self.flows[flow].in_flight < limit {
            self.flows[flow].paced_backlog -= 1;
            self.transmit(flow)?;
        }
        Ok(())
    }

    fn after_window_change(&mut self, flow: usize) -> Result<(), SimError> {
        if self.sc.controller.variant.is_pacing() {
            self.drain_backlog(flow)
        } else {
            self.pump(flow)
        }
    }

    fn handle(&mut self, ev: Event) -> Result<(), SimError> {
        let flow = ev.flow as usize;
        match ev.kind {
            EventKind::FlowStart => {
                let f = &mut self.flows[flow];
                f.started = true;
                f.ctrl.start(f.spec.initial_cwnd);
                if self.sc.controller.variant.is_pacing() {
                    self.schedule(self.now, flow, 0, EventKind::PacingRound)?;
                } else {
                    self.pump(flow)?;
                }
            }
            EventKind::Departure => {
                let pkt = self.queue.pop_front().expect("departure with empty queue");
                let f = &mut self.flows[pkt.flow as usize];
                f.counters.delivered += 1;
                f.bin += 1;
                let rx = self.now + self.prop;
                let rx_stamp = rx.0 as i64 + self.offset_ticks;
                self.schedule(rx + self.prop, pkt.flow as usize, pkt.seq, EventKind::Ack { tx: pkt.tx_time, rx_stamp })?;
                if let Some(next) = self.queue.front().copied() {
                    self.head_finish = self.now + self.service;
                    self.schedule(self.head_finish, next.flow as usize, next.seq, EventKind::Departure)?;
                } else {
                    self.link_busy = false;
                }
            }
            EventKind::Ack { tx, rx_stamp } => {
                let now_s = self.now.as_secs();
                let f = &mut self.flows[flow];
                f.in_flight -= 1;
                let sample = DelaySample::new(
                    time::ticks_to_secs(rx_stamp - tx.0 as i64),
                    now_s,
                    (self.now - tx).as_secs(),
                );
                let ev = f.ctrl.on_ack(sample).expect("started flow accepts clean samples");
                self.log_decrease(flow, ev);
                self.after_window_change(flow)?;
            }
            EventKind::LossSignal => {
                let f = &mut self.flows[flow];
                f.in_flight -= 1;
                let ev = f.ctrl.on_loss(self.now.as_secs());
                self.log_decrease(flow, ev);
                self.after_window_change(flow)?;
            }
            EventKind::PacingRound => {
                let default_rtt = 2.0 * self.sc.prop_delay + self.sc.controller.target_tau;
                let f = &mut self.flows[flow];
                let rtt = f.ctrl.rtt_estimate().unwrap_or(default_rtt);
                let n = (f.ctrl.cwnd().round() as usize).max(1);
                let offsets = f.ctrl.pacing_schedule(rtt, n);
                f.paced_backlog = 0;
                f.pacing_round += 1;
                let round = f.pacing_round;
                for off in offsets {
                    self.schedule(self.now + SimTime::from_secs(off), flow, round, EventKind::PacedSend)?;
                }
                let next = self.now + SimTime::from_secs(rtt).max(SimTime(1));
                self.schedule(next, flow, round + 1, EventKind::PacingRound)?;
            }
            EventKind::PacedSend => {
                let limit = self.flows[flow].allowance();
                if self.flows[flow].in_flight < limit {
                    self.transmit(flow)?;
                } else {
                    self.flows[flow].paced_backlog += 1;
                }
            }
        }
        Ok(())
    }

    fn take_sample(&mut self, k: u64) {
        self.out.times.push(k as f64 * self.sc.sample_interval);
        self.out.queue.push(self.queue.len());
        if !self.queue.is_empty() && !self.link_busy {
            self.out.idle_with_backlog += 1;
        }
        for f in &mut self.flows {
            f.trace.cwnd.push(if f.started { f.ctrl.cwnd() } else { 0.0 });
            f.trace.delivered.push(f.bin);
            f.bin = 0;
        }
    }

    fn run(mut self) -> Result<SimTrace, SimError> {
        if self.sc.duration == 0.0 {
            return Ok(self.finish());
        }
        let end = SimTime::from_secs(self.sc.duration);
        let interval = self.sc.sample_interval;
        let at = |k: u64| SimTime::from_secs(k as f64 * interval);
        let n_samples = (self.sc.duration / self.sc.sample_interval + 1e-9).floor() as u64;
        for i in 0..self.flows.len() {
            let t = SimTime::from_secs(self.flows[i].spec.start_time);
            self.schedule(t, i, 0, EventKind::FlowStart)?;
        }

        let mut k = 1u64;
        while let Some(&ev) = self.heap.peek() {
            if ev.time >= end {
                break;
            }
            self.heap.pop();
            while k <= n_samples && at(k) <= ev.time {
                self.take_sample(k);
                k += 1;
            }
            self.now = ev.time;
            self.handle(ev)?;
        }
        while k <= n_samples {
            self.take_sample(k);
            k += 1;
        }
        Ok(self.finish())
    }

    fn finish(mut self) -> SimTrace {
        for pkt in &self.queue {
            self.flows[pkt.flow as usize].counters.queued += 1;
        }
        for ev in self.heap.iter() {
            let f = &mut self.flows[ev.flow as usize].counters;
            match ev.kind {
                EventKind::Ack { .. } => f.acks_pending += 1,
                EventKind::LossSignal => f.loss_signals_pending += 1,
                _ => {}
            }
        }
        for f in &mut self.flows {
            f.counters.in_flight = f.in_flight;
            f.trace.counters = f.counters;
            f.trace.final_base_delay = f.ctrl.state.base_delay;
        }
        self.out.flows = self.flows.into_iter().map(|f| f.trace).collect();
        self.out
    }
}

/// Runs `scenario` to completion.
pub fn run(scenario: &Scenario) -> Result<SimTrace, SimError> {
    scenario.validate()?;
    Sim::new(scenario)?.run()
}
