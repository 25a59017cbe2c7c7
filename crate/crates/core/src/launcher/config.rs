use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::AdapterConfig;
use crate::geodesy::GeoPoint;
use crate::planner::PlannerConfig;
use crate::vehicle_sim::SimConfig;

use super::LaunchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Ticks paced to the wall clock, for live use with the web client.
    Wall,
    /// Ticks as fast as possible; fully deterministic.
    #[default]
    Logical,
}

impl std::str::FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wall" => Ok(ClockMode::Wall),
            "logical" => Ok(ClockMode::Logical),
            other => Err(format!("clock must be `wall` or `logical`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub enabled: bool,
    pub bind: String,
    pub port: u16,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            bind: "127.0.0.1".into(),
            port: 8642,
        }
    }
}

impl HttpConfig {
    pub fn address(&self) -> String {
        if self.bind.contains(':') {
            format!("[{}]:{}", self.bind, self.port)
        } else {
            format!("{}:{}", self.bind, self.port)
        }
    }
}

/// Which node feeds the localization context topics. Exactly one must be on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationChoice {
    pub odom_repub: bool,
    pub actor_localization: bool,
}

impl Default for LocalizationChoice {
    fn default() -> Self {
        Self {
            odom_repub: false,
            actor_localization: true,
        }
    }
}

/// Everything needed to bring the system up. Loaded from JSON; every field
/// has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaunchConfig {
    pub sim: SimConfig,
    pub planner: PlannerConfig,
    pub adapters: AdapterConfig,
    pub http: HttpConfig,
    pub clock: ClockMode,
    /// Required in logical mode.
    pub seed: Option<u64>,
    pub localization: LocalizationChoice,
    /// Base station and starting position.
    pub origin: GeoPoint,
    /// Initial compass heading, degrees.
    pub initial_yaw_deg: f64,
    pub telemetry_hz: f64,
    pub scenario: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Queue length that triggers a bus warning.
    pub high_water: usize,
}

impl Default for LaunchConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            planner: PlannerConfig::default(),
            adapters: AdapterConfig::default(),
            http: HttpConfig::default(),
            clock: ClockMode::Logical,
            seed: Some(1),
            localization: LocalizationChoice::default(),
            origin: GeoPoint::new(42.4734, -83.2486),
            initial_yaw_deg: 0.0,
            telemetry_hz: 10.0,
            scenario: None,
            trace: None,
            high_water: 10_000,
        }
    }
}

impl LaunchConfig {
    pub fn load(path: &Path) -> Result<Self, LaunchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LaunchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            LaunchError::Config(m) => LaunchError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, LaunchError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| LaunchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LaunchError> {
        let bad = |m: String| Err(LaunchError::Config(m));
        self.sim.validate().map_err(LaunchError::Config)?;
        self.planner.validate().map_err(LaunchError::Config)?;
        self.adapters.validate().map_err(LaunchError::Config)?;
        if self.clock == ClockMode::Logical && self.seed.is_none() {
            return bad("seed is required with the logical clock".into());
        }
        if self.localization.odom_repub == self.localization.actor_localization {
            return bad(
                "enable exactly one of localization.odom_repub and localization.actor_localization"
                    .into(),
            );
        }
        if !(self.telemetry_hz.is_finite() && self.telemetry_hz >= 5.0) {
            return bad(format!(
                "telemetry_hz must be at least 5, got {}",
                self.telemetry_hz
            ));
        }
        if self.telemetry_hz > self.sim.tick_hz {
            return bad("telemetry_hz cannot exceed sim.tick_hz".into());
        }
        if self.origin.latitude.abs() > 84.0 || self.origin.longitude.abs() > 180.0 {
            return bad(format!("origin {:?} is outside the UTM band", self.origin));
        }
        if !self.initial_yaw_deg.is_finite() {
            return bad("initial_yaw_deg must be finite".into());
        }
        Ok(())
    }
}
