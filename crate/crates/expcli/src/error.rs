use std::io;
use std::path::PathBuf;

use ledbat::{FluidError, MetricsError, SimError};
use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("fluid model: {0}")]
    Fluid(#[from] FluidError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("unknown preset `{0}`; try one of: {1}")]
    UnknownPreset(String, String),
    #[error("simulation invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Input(String),
}

impl ExpError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> ExpError {
        let path = path.into();
        move |source| ExpError::Io { path, source }
    }
}

pub type Result<T, E = ExpError> = std::result::Result<T, E>;
