use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geodesy::GeoPoint;
use crate::vehicle_sim::{GpsMode, OverrideKind};

use super::LaunchError;

/// Obstacle given as an offset from the scenario origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    #[serde(default)]
    pub id: Option<String>,
    /// m east of the origin
    pub east: f64,
    /// m north of the origin
    pub north: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case")]
pub enum Action {
    Summon {
        latitude: f64,
        longitude: f64,
    },
    /// Summon to a point given relative to the origin, in metres.
    SummonOffset {
        east: f64,
        north: f64,
    },
    GpsMode {
        mode: GpsMode,
    },
    Override {
        kind: OverrideKind,
        on: bool,
    },
    /// Silence ulc reports for this many seconds.
    SuppressUlc {
        duration: f64,
    },
    AddObstacle(ObstacleSpec),
    RemoveObstacle {
        id: String,
    },
    Estop {
        on: bool,
    },
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Simulation time, s.
    pub at: f64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArriveExpectation {
    /// Latest acceptable arrival time, s.
    pub within: f64,
    /// Ground-truth distance to the goal that counts as arrived, m.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expectations {
    pub arrive: Option<ArriveExpectation>,
    /// `estop_sense` must have been raised by this time.
    pub estop_by: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    /// s
    pub duration: f64,
    /// Overrides the configured origin.
    #[serde(default)]
    pub origin: Option<GeoPoint>,
    #[serde(default)]
    pub initial_yaw_deg: Option<f64>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub expect: Expectations,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, LaunchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LaunchError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| LaunchError::Scenario(format!("{}: {}", path.display(), e.detail())))
    }

    pub fn from_json(text: &str) -> Result<Self, LaunchError> {
        let s: Self =
            serde_json::from_str(text).map_err(|e| LaunchError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), LaunchError> {
        let bad = |m: String| Err(LaunchError::Scenario(m));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        let mut last = 0.0;
        for (i, e) in self.events.iter().enumerate() {
            if !(e.at.is_finite() && e.at >= 0.0) {
                return bad(format!("event {i}: `at` must be a non-negative time"));
            }
            if e.at < last {
                return bad(format!("event {i}: events must be sorted by time"));
            }
            if e.at > self.duration {
                return bad(format!("event {i} at {} is after the end", e.at));
            }
            last = e.at;
            match &e.action {
                Action::Summon {
                    latitude,
                    longitude,
                } if latitude.abs() > 84.0 || longitude.abs() > 180.0 => {
                    return bad(format!("event {i}: summon point outside the UTM band"));
                }
                Action::SuppressUlc { duration } if !(*duration > 0.0) => {
                    return bad(format!("event {i}: suppress duration must be positive"));
                }
                Action::AddObstacle(o) if !(o.radius > 0.0) => {
                    return bad(format!("event {i}: obstacle radius must be positive"));
                }
                _ => {}
            }
        }
        if self.obstacles.iter().any(|o| !(o.radius > 0.0)) {
            return bad("obstacle radius must be positive".into());
        }
        if let Some(a) = self.expect.arrive {
            if !(a.within > 0.0 && a.tolerance > 0.0) {
                return bad("arrive expectation needs positive within and tolerance".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_actions() {
        let s = Scenario::from_json(
            r#"{
              "name": "all", "duration": 10,
              "events": [
                {"at": 0, "do": "summon", "latitude": 42.5, "longitude": -83.2},
                {"at": 1, "do": "summon_offset", "east": 0, "north": 100},
                {"at": 2, "do": "gps_mode", "mode": "SPP"},
                {"at": 3, "do": "override", "kind": "pedals", "on": true},
                {"at": 4, "do": "suppress_ulc", "duration": 0.8},
                {"at": 5, "do": "add_obstacle", "id": "box", "east": 0, "north": 3, "radius": 0.5},
                {"at": 6, "do": "remove_obstacle", "id": "box"},
                {"at": 7, "do": "estop", "on": true},
                {"at": 8, "do": "reset"}
              ],
              "expect": {"arrive": {"within": 9, "tolerance": 1.5}, "estop_by": 7.5}
            }"#,
        )
        .unwrap();
        assert_eq!(s.events.len(), 9);
        assert_eq!(s.events[2].action, Action::GpsMode { mode: GpsMode::Spp });
        assert_eq!(s.events[8].action, Action::Reset);
    }

    #[test]
    fn schema_violations() {
        for bad in [
            r#"{"duration": 0}"#,
            r#"{"duration": 5, "events": [{"at": 6, "do": "reset"}]}"#,
            r#"{"duration": 5, "events": [{"at": 2, "do": "reset"}, {"at": 1, "do": "reset"}]}"#,
            r#"{"duration": 5, "events": [{"at": 1, "do": "fly"}]}"#,
            r#"{"duration": 5, "extra": 1}"#,
            r#"{"duration": 5, "events": [{"at": 1, "do": "summon", "latitude": 89, "longitude": 0}]}"#,
        ] {
            assert!(Scenario::from_json(bad).is_err(), "{bad}");
        }
    }
}
