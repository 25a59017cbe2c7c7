//! Configuration, node wiring, the simulation clock, scenarios and trace
//! replay.

mod config;
mod replay;
mod scenario;
mod system;

use std::io;

use thiserror::Error;

use crate::bus::BusError;
use crate::geodesy::GeodesyError;

pub use config::{ClockMode, HttpConfig, LaunchConfig, LocalizationChoice};
pub use replay::{replay_file, replay_reader, ReplayError, ReplayReport, Violation};
pub use scenario::{Action, ArriveExpectation, Event, Expectations, ObstacleSpec, Scenario};
pub use system::{ScenarioReport, System};

#[derive(Debug, Error)]
pub enum LaunchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("cannot serve http on {addr}: {source}")]
    Http { addr: String, source: io::Error },
    #[error("trace file: {0}")]
    Trace(String),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
}

impl LaunchError {
    /// Message without the category prefix.
    pub fn detail(&self) -> String {
        match self {
            LaunchError::Config(m) | LaunchError::Scenario(m) | LaunchError::Trace(m) => m.clone(),
            other => other.to_string(),
        }
    }
}
