//! Bridge nodes between the planner side (speed/curvature setpoints,
//! localization topics, safety monitor) and the drive-by-wire side (Twist
//! commands, ulc reports, raw GPS topics).
//!
//! Each node keeps its logic in plain methods that take a message and return
//! what should be published, and an `attach` function that wires those
//! methods onto a [`Bus`](crate::bus::Bus).

mod localization;
mod low_level;
mod piksi;
mod safety;
mod speed_curv;

use serde::{Deserialize, Serialize};

pub use localization::{
    ActorLocalization, FixSelectorState, LocalizationContext, OdomRepub, VelocityTracker,
};
pub use low_level::LowLevelController;
pub use piksi::PiksiOdomPub;
pub use safety::{report_fault, EstopHeartbeat, SafetyLatch};
pub use speed_curv::{speed_curv_to_twist, SpeedCurvToTwist};

/// Thresholds shared by the adapter nodes. Times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    /// A GPS source older than this is stale.
    pub staleness_threshold: f64,
    /// Longest tolerated gap between ulc reports.
    pub heartbeat_timeout: f64,
    /// An SPP sample is withheld if an RTK fix arrived within this window.
    pub fix_preference_window: f64,
    /// Setpoints are gated when no localized pose arrived for this long.
    pub localization_timeout: f64,
    /// How long a reset request waits for the fault to clear.
    pub reset_window: f64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            staleness_threshold: 1.0,
            heartbeat_timeout: 0.5,
            fix_preference_window: 0.2,
            localization_timeout: 1.0,
            reset_window: 1.0,
        }
    }
}

impl AdapterConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("staleness_threshold", self.staleness_threshold),
            ("heartbeat_timeout", self.heartbeat_timeout),
            ("fix_preference_window", self.fix_preference_window),
            ("localization_timeout", self.localization_timeout),
            ("reset_window", self.reset_window),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("adapters.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}
