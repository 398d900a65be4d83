//! Config files, presets, seeded sweeps and plot tables for the `ledbat`
//! simulator.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod plotdata;
pub mod presets;
pub mod runner;

pub use config::{Config, ConfigError};
pub use error::ExpError;
pub use experiment::{Arrival, FluidSpec, RunSpec, SweepParam, SweepSpec};
