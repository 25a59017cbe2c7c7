//! Point-and-go planner: pure pursuit toward a single waypoint with a
//! forward-corridor obstacle stop.
//!
//! This is a stand-in with a documented contract, not a reproduction of any
//! proprietary planner. It drives straight at the goal, slows down inside
//! twice the arrival tolerance, stops inside the tolerance and latches
//! `arrived`, and refuses to move while anything sits in the corridor in
//! front of the vehicle.
//!
//! ```
//! use vss_core::planner::{pure_pursuit, PlannerConfig};
//! use vss_core::messages::Pose2D;
//!
//! let cfg = PlannerConfig::default();
//! let pose = Pose2D { easting: 0.0, northing: 0.0, yaw: 0.0 };
//! // goal 50 m due north, vehicle facing north
//! let cmd = pure_pursuit(&pose, (0.0, 50.0), &cfg);
//! assert_eq!(cmd.curvature, 0.0);
//! assert_eq!(cmd.speed, cfg.cruise_speed);
//! ```

use std::cell::RefCell;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::bus::{emit, Bus, BusError};
use crate::geodesy::{GeodesyError, UtmZone};
use crate::messages::{
    topics, LidarScan, Message, MobilityMode, PlannerStatus, Pose2D, SpeedCurvatureSetpoint,
    SteeringSense, Velocity6D, Waypoint,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// m
    pub lookahead: f64,
    /// m/s
    pub cruise_speed: f64,
    /// m
    pub arrival_tolerance: f64,
    /// Corridor depth, m.
    pub stop_distance: f64,
    /// m
    pub corridor_half_width: f64,
    /// 1/m. The launcher overwrites this with the vehicle's limit.
    pub max_curvature: f64,
    /// A scan older than this (s) counts as no scan, and the planner stops.
    pub scan_timeout: f64,
    pub steering_sense: SteeringSense,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            lookahead: 4.0,
            cruise_speed: 2.0,
            arrival_tolerance: 1.5,
            stop_distance: 4.0,
            corridor_half_width: 1.2,
            max_curvature: 0.35,
            scan_timeout: 0.5,
            steering_sense: SteeringSense::Positive,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("lookahead", self.lookahead),
            ("cruise_speed", self.cruise_speed),
            ("arrival_tolerance", self.arrival_tolerance),
            ("stop_distance", self.stop_distance),
            ("corridor_half_width", self.corridor_half_width),
            ("max_curvature", self.max_curvature),
            ("scan_timeout", self.scan_timeout),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("planner.{name} must be positive, got {v}"));
            }
        }
        if self.lookahead <= self.arrival_tolerance {
            return Err(format!(
                "planner.lookahead ({}) must exceed arrival_tolerance ({})",
                self.lookahead, self.arrival_tolerance
            ));
        }
        Ok(())
    }
}

/// Output of one pure-pursuit evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuitCommand {
    pub speed: f64,
    pub curvature: f64,
    pub distance: f64,
}

/// Goal position in the vehicle frame (x forward, y left).
pub fn goal_in_vehicle_frame(pose: &Pose2D, goal: (f64, f64)) -> (f64, f64) {
    let (de, dn) = (goal.0 - pose.easting, goal.1 - pose.northing);
    let (s, c) = pose.yaw.sin_cos();
    (de * s + dn * c, -de * c + dn * s)
}

/// Pure pursuit toward `goal` (easting, northing).
///
/// The target sits on the line to the goal at `ld = min(distance, lookahead)`
/// and `κ = sense · 2y / ld²`. A target at or behind the vehicle's lateral
/// axis gets full lock toward its side. Inside the arrival tolerance the
/// command is a stop.
pub fn pure_pursuit(pose: &Pose2D, goal: (f64, f64), cfg: &PlannerConfig) -> PursuitCommand {
    let (gx, gy) = goal_in_vehicle_frame(pose, goal);
    let distance = gx.hypot(gy);
    if distance <= cfg.arrival_tolerance {
        return PursuitCommand {
            speed: 0.0,
            curvature: 0.0,
            distance,
        };
    }
    let ld = distance.min(cfg.lookahead);
    let (x, y) = (gx * ld / distance, gy * ld / distance);
    let raw = if x <= 0.0 {
        if y < 0.0 {
            -cfg.max_curvature
        } else {
            cfg.max_curvature
        }
    } else {
        2.0 * y / (ld * ld)
    };
    let curvature = cfg.steering_sense.sign() * raw.clamp(-cfg.max_curvature, cfg.max_curvature);
    let speed = cfg.cruise_speed * (distance / (2.0 * cfg.arrival_tolerance)).min(1.0);
    PursuitCommand {
        speed,
        curvature,
        distance,
    }
}

/// True if any scan point lies in `x ∈ (0, stop_distance]`, `|y| ≤ half_width`.
pub fn corridor_blocked(scan: &LidarScan, cfg: &PlannerConfig) -> bool {
    scan.points
        .iter()
        .any(|p| p.x > 0.0 && p.x <= cfg.stop_distance && p.y.abs() <= cfg.corridor_half_width)
}

/// Planar distance test against the arrival tolerance.
pub fn arrival_check(pose: &Pose2D, goal: &Waypoint, tolerance: f64) -> bool {
    (goal.easting - pose.easting).hypot(goal.northing - pose.northing) <= tolerance
}

pub struct Planner {
    pub cfg: PlannerConfig,
    zone: UtmZone,
    goal: Option<Waypoint>,
    mode: Option<MobilityMode>,
    arrived: bool,
    scan: Option<(LidarScan, f64)>,
}

impl Planner {
    /// `zone` is the UTM zone the run is confined to.
    pub fn new(cfg: PlannerConfig, zone: UtmZone) -> Self {
        Self {
            cfg,
            zone,
            goal: None,
            mode: None,
            arrived: false,
            scan: None,
        }
    }

    pub fn goal(&self) -> Option<&Waypoint> {
        self.goal.as_ref()
    }

    pub fn arrived(&self) -> bool {
        self.arrived
    }

    pub fn active(&self) -> bool {
        self.goal.is_some()
    }

    /// Store a goal. Any mode other than waypoint driving clears the goal.
    pub fn set_goal(&mut self, w: Waypoint, m: MobilityMode) -> Result<(), GeodesyError> {
        self.mode = Some(m);
        if m.mobility_mode != MobilityMode::WAYPOINT {
            self.goal = None;
            self.arrived = false;
            return Ok(());
        }
        if w.utm_zone != self.zone {
            return Err(GeodesyError::ZoneMismatch {
                expected: self.zone,
                found: w.utm_zone,
            });
        }
        self.goal = Some(w);
        self.arrived = false;
        Ok(())
    }

    pub fn on_mode(&mut self, m: MobilityMode) {
        self.mode = Some(m);
        if m.mobility_mode != MobilityMode::WAYPOINT {
            if self.goal.take().is_some() {
                tracing::info!(mode = m.mobility_mode, "goal cleared by mobility mode");
            }
            self.arrived = false;
        }
    }

    /// A waypoint becomes the goal under the current mobility mode.
    pub fn on_waypoint(&mut self, w: Waypoint) {
        let Some(m) = self.mode else {
            tracing::warn!("waypoint without mobility mode ignored");
            return;
        };
        if let Err(e) = self.set_goal(w, m) {
            tracing::warn!(%e, "waypoint rejected");
        }
    }

    pub fn on_scan(&mut self, scan: LidarScan, now: f64) {
        self.scan = Some((scan, now));
    }

    /// One planning step. `None` while idle.
    pub fn plan_step(
        &mut self,
        pose: &Velocity6D,
        now: f64,
    ) -> Option<(SpeedCurvatureSetpoint, PlannerStatus)> {
        let goal = self.goal?;
        let sense = self.cfg.steering_sense;
        if !self.arrived && arrival_check(&pose.pose, &goal, self.cfg.arrival_tolerance) {
            self.arrived = true;
            tracing::info!(t = now, "arrived");
        }
        let cmd = pure_pursuit(&pose.pose, (goal.easting, goal.northing), &self.cfg);
        let blocked = match &self.scan {
            Some((scan, t)) if now - t <= self.cfg.scan_timeout => {
                corridor_blocked(scan, &self.cfg)
            }
            _ => true,
        };
        let sp = if self.arrived || blocked {
            SpeedCurvatureSetpoint::stop(sense)
        } else {
            SpeedCurvatureSetpoint {
                speed: cmd.speed,
                curvature: cmd.curvature,
                steering_sense: sense,
            }
        };
        let status = PlannerStatus {
            active: true,
            arrived: self.arrived,
            blocked,
            distance_to_goal: Some(cmd.distance),
        };
        Some((sp, status))
    }

    fn idle_status(&self) -> PlannerStatus {
        PlannerStatus {
            active: false,
            arrived: false,
            blocked: false,
            distance_to_goal: None,
        }
    }

    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let sense = self.cfg.steering_sense.sign();
        let now = bus.now();
        bus.publish(topics::STEERING_SENSE, sense, now)?;
        bus.publish(topics::PLANNER_STATUS, self.idle_status(), now)?;

        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::COMMAND_MOBILITY_MODE, true, move |env, out| {
            if let Message::MobilityMode(m) = env.payload {
                let mut p = n.borrow_mut();
                let had_goal = p.active();
                p.on_mode(m);
                if had_goal && !p.active() {
                    emit(out, topics::PLANNER_STATUS, p.idle_status());
                }
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::POINT_AND_GO_WAYPOINT, true, move |env, _| {
            if let Message::Waypoint(w) = env.payload {
                n.borrow_mut().on_waypoint(w);
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::VELODYNE_POINTS, false, move |env, out| {
            if let Message::LidarScan(s) = &env.payload {
                n.borrow_mut().on_scan(s.clone(), out.now());
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::VELOCITY_6D, false, move |env, out| {
            if let Message::Velocity6D(v) = &env.payload {
                let step = n.borrow_mut().plan_step(v, out.now());
                if let Some((sp, status)) = step {
                    emit(out, topics::SPEED_SETPOINT, sp.speed);
                    emit(out, topics::CURVATURE_SETPOINT, sp.curvature);
                    emit(out, topics::PLANNER_STATUS, status);
                }
            }
        })?;
        Ok(node)
    }
}
