//! LEDBAT congestion control under late-comer conditions.
//!
//! The crate is organised in four layers:
//!
//! - [`controller`]: a pure, simulator-agnostic sender state machine implementing
//!   the LEDBAT linear controller plus four fairness variants (random pacing,
//!   slow start, random window drops and multiplicative decrease).
//! - [`netsim`]: a deterministic discrete-event simulator with N flows sharing a
//!   single drop-tail bottleneck.
//! - [`fluid`]: a fixed-step fluid model of the additive increase/decrease window
//!   dynamics with per-flow base-delay errors, used as an independent oracle.
//! - [`metrics`]: link efficiency, Jain's fairness index and replication statistics.
//!
//! Controller, fluid and metric math is generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below pin the common `f64` instantiations.

pub mod controller;
pub mod fluid;
pub mod metrics;
pub mod netsim;
pub mod scalar;
pub mod seed;

pub use controller::{
    ControlEvent, ControllerConfig, ControllerError, ControllerState, DecreaseCause, DelaySample,
    LedbatController, Variant,
};
pub use fluid::{FluidError, FluidSystem, FluidTrace, Verdict};
pub use metrics::{MetricsError, MetricsReport, Summary};
pub use netsim::{FlowSpec, Scenario, SimError, SimTrace};
pub use scalar::Scalar;

pub type Controller = LedbatController<f64>;
pub type Controller32 = LedbatController<f32>;
pub type Config = ControllerConfig<f64>;
pub type Config32 = ControllerConfig<f32>;
pub type Fluid = FluidSystem<f64>;
pub type Fluid32 = FluidSystem<f32>;
pub type Report = MetricsReport<f64>;
