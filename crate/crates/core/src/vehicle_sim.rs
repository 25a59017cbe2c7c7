//! Simulated drive-by-wire vehicle with RTK/SPP GPS, dual-antenna heading and
//! a ring-point lidar.
//!
//! Motion is a forward-only unicycle: speed slews toward the commanded speed
//! at no more than `max_accel`, and the path bends with the commanded
//! curvature `angular_z / linear_x`, limited to `max_curvature`. Positions are
//! UTM easting/northing, headings are compass radians.

use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bus::{Bus, BusError};
use crate::messages::{
    normalize_compass, topics, BaselineHeading, BestFixStatus, FixQuality, GpsFixKind,
    GpsFixSample, LidarPoint, LidarScan, Message, Twist, UlcReport,
};

/// Lidar range used when building scans, m.
pub const LIDAR_RANGE: f64 = 30.0;
/// Points generated around each obstacle's circle.
pub const RING_POINTS: usize = 72;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub easting: f64,
    pub northing: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub wheelbase: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    pub max_curvature: f64,
    pub tick_hz: f64,
    pub gps_sigma_rtk: f64,
    pub gps_sigma_spp: f64,
    pub heading_sigma_deg: f64,
    pub gps_rate_hz: f64,
    pub lidar_rate_hz: f64,
    /// Commands older than this are treated as zero speed, s.
    pub cmd_timeout: f64,
    pub obstacles: Vec<Obstacle>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            wheelbase: 1.9,
            max_speed: 4.0,
            max_accel: 1.5,
            max_curvature: 0.35,
            tick_hz: 50.0,
            gps_sigma_rtk: 0.02,
            gps_sigma_spp: 1.5,
            heading_sigma_deg: 0.5,
            gps_rate_hz: 10.0,
            lidar_rate_hz: 10.0,
            cmd_timeout: 0.5,
            obstacles: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("wheelbase", self.wheelbase),
            ("max_speed", self.max_speed),
            ("max_accel", self.max_accel),
            ("max_curvature", self.max_curvature),
            ("tick_hz", self.tick_hz),
            ("gps_sigma_rtk", self.gps_sigma_rtk),
            ("gps_sigma_spp", self.gps_sigma_spp),
            ("gps_rate_hz", self.gps_rate_hz),
            ("lidar_rate_hz", self.lidar_rate_hz),
            ("cmd_timeout", self.cmd_timeout),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("sim.{name} must be positive, got {v}"));
            }
        }
        if !(self.heading_sigma_deg >= 0.0) {
            return Err("sim.heading_sigma_deg must be non-negative".into());
        }
        if self.gps_sigma_rtk >= self.gps_sigma_spp {
            return Err("sim.gps_sigma_rtk must be smaller than sim.gps_sigma_spp".into());
        }
        if self.gps_rate_hz > self.tick_hz || self.lidar_rate_hz > self.tick_hz {
            return Err("sensor rates cannot exceed sim.tick_hz".into());
        }
        for o in &self.obstacles {
            if !(o.radius > 0.0) {
                return Err("obstacle radius must be positive".into());
            }
        }
        Ok(())
    }

    /// Largest yaw rate the vehicle can produce, rad/s.
    pub fn max_yaw_rate(&self) -> f64 {
        self.max_speed * self.max_curvature
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub easting: f64,
    pub northing: f64,
    /// Compass heading, rad.
    pub yaw: f64,
    pub speed: f64,
    pub dbw_enabled: bool,
    pub override_steering: bool,
    pub override_pedals: bool,
    pub physical_estop: bool,
}

impl VehicleState {
    pub fn at(easting: f64, northing: f64, yaw: f64) -> Self {
        Self {
            easting,
            northing,
            yaw: normalize_compass(yaw),
            speed: 0.0,
            dbw_enabled: true,
            override_steering: false,
            override_pedals: false,
            physical_estop: false,
        }
    }

    /// True when the drive-by-wire system must not follow commands.
    pub fn halted(&self) -> bool {
        self.override_steering || self.override_pedals || self.physical_estop || !self.dbw_enabled
    }
}

/// Advance the vehicle by one step.
///
/// `Twist::angular_z` is counter-clockwise positive, so a positive command
/// lowers the compass heading.
pub fn tick(state: &VehicleState, cmd: Twist, dt: f64, cfg: &SimConfig) -> VehicleState {
    let finite = cmd.linear_x.is_finite() && cmd.angular_z.is_finite();
    let target = if state.halted() || !finite {
        0.0
    } else {
        cmd.linear_x.clamp(0.0, cfg.max_speed)
    };
    let dv = cfg.max_accel * dt;
    let speed = (state.speed + (target - state.speed).clamp(-dv, dv)).clamp(0.0, cfg.max_speed);

    let curvature = if finite && cmd.linear_x.abs() > 1e-9 {
        (cmd.angular_z / cmd.linear_x).clamp(-cfg.max_curvature, cfg.max_curvature)
    } else {
        0.0
    };
    let dyaw = -speed * curvature * dt;
    let mid = state.yaw + dyaw / 2.0;

    VehicleState {
        easting: state.easting + speed * mid.sin() * dt,
        northing: state.northing + speed * mid.cos() * dt,
        yaw: normalize_compass(state.yaw + dyaw),
        speed,
        ..*state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GpsMode {
    #[serde(rename = "RTK")]
    Rtk,
    #[serde(rename = "SPP")]
    Spp,
    #[serde(rename = "NONE")]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideKind {
    Steering,
    Pedals,
    PhysicalEstop,
}

/// One GPS epoch as the receiver would report it.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsEpoch {
    pub fix: Option<GpsFixSample>,
    pub spp: Option<GpsFixSample>,
    pub heading: Option<BaselineHeading>,
    pub best: BestFixStatus,
}

/// Noisy receiver outputs for the ground-truth state. `base` is the base
/// station position (easting, northing) that anchors the east/north frame.
pub fn sample_gps(
    state: &VehicleState,
    mode: GpsMode,
    base: (f64, f64),
    now: f64,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> GpsEpoch {
    let east = state.easting - base.0;
    let north = state.northing - base.1;
    let mut noisy = |kind, sigma: f64| {
        let de: f64 = rng.sample(StandardNormal);
        let dn: f64 = rng.sample(StandardNormal);
        GpsFixSample {
            kind,
            east: east + sigma * de,
            north: north + sigma * dn,
            sigma,
            sim_time: now,
        }
    };
    let fix = (mode == GpsMode::Rtk).then(|| noisy(GpsFixKind::EnuFix, cfg.gps_sigma_rtk));
    let spp = (mode != GpsMode::None).then(|| noisy(GpsFixKind::EnuSpp, cfg.gps_sigma_spp));
    let heading = (mode != GpsMode::None).then(|| {
        let z: f64 = rng.sample(StandardNormal);
        BaselineHeading {
            heading: normalize_compass(state.yaw + cfg.heading_sigma_deg.to_radians() * z),
        }
    });
    let quality = match mode {
        GpsMode::Rtk => FixQuality::Rtk,
        GpsMode::Spp => FixQuality::Spp,
        GpsMode::None => FixQuality::None,
    };
    GpsEpoch {
        fix,
        spp,
        heading,
        best: BestFixStatus { quality, age: 0.0 },
    }
}

/// World point expressed in the vehicle frame (x forward, y left).
pub fn to_vehicle_frame(state: &VehicleState, easting: f64, northing: f64) -> (f64, f64) {
    let de = easting - state.easting;
    let dn = northing - state.northing;
    let (s, c) = state.yaw.sin_cos();
    (de * s + dn * c, -de * c + dn * s)
}

/// Ring points of every obstacle whose centre is within [`LIDAR_RANGE`].
pub fn sample_lidar(state: &VehicleState, obstacles: &[Obstacle]) -> LidarScan {
    let mut points = Vec::new();
    for o in obstacles {
        let range = (o.easting - state.easting).hypot(o.northing - state.northing);
        if range > LIDAR_RANGE {
            continue;
        }
        for k in 0..RING_POINTS {
            let a = std::f64::consts::TAU * k as f64 / RING_POINTS as f64;
            let (x, y) = to_vehicle_frame(
                state,
                o.easting + o.radius * a.sin(),
                o.northing + o.radius * a.cos(),
            );
            points.push(LidarPoint { x, y, z: 0.0 });
        }
    }
    LidarScan { points }
}

pub fn ulc_report(state: &VehicleState, now: f64) -> UlcReport {
    UlcReport {
        measured_speed: state.speed,
        dbw_enabled: state.dbw_enabled,
        override_steering: state.override_steering,
        override_pedals: state.override_pedals,
        sim_time: now,
    }
}

/// The vehicle as a bus node. The launcher calls [`VehicleSim::step`] once per
/// tick; commands arrive on `polaris/vehicle/cmd_vel`.
pub struct VehicleSim {
    pub state: VehicleState,
    cfg: SimConfig,
    base: (f64, f64),
    rng: ChaCha8Rng,
    gps_mode: GpsMode,
    obstacles: Vec<Obstacle>,
    last_cmd: Option<(Twist, f64)>,
    ticks: u64,
    ulc_suppressed_until: f64,
    last_fix_time: Option<f64>,
    reset_requested: bool,
}

impl VehicleSim {
    pub fn new(cfg: SimConfig, initial: VehicleState, base: (f64, f64), rng: ChaCha8Rng) -> Self {
        let obstacles = cfg.obstacles.clone();
        Self {
            state: initial,
            cfg,
            base,
            rng,
            gps_mode: GpsMode::Rtk,
            obstacles,
            last_cmd: None,
            ticks: 0,
            ulc_suppressed_until: f64::NEG_INFINITY,
            last_fix_time: None,
            reset_requested: false,
        }
    }

    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::CMD_VEL, false, move |env, out| {
            if let Message::Twist(t) = &env.payload {
                n.borrow_mut().last_cmd = Some((*t, out.now()));
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::ESTOP_RESET, false, move |_, _| {
            n.borrow_mut().reset_requested = true;
        })?;
        Ok(node)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn gps_mode(&self) -> GpsMode {
        self.gps_mode
    }

    pub fn set_gps_mode(&mut self, mode: GpsMode) {
        self.gps_mode = mode;
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn add_obstacle(&mut self, o: Obstacle) {
        self.obstacles.push(o);
    }

    /// Remove obstacles with this id; returns how many were removed.
    pub fn remove_obstacle(&mut self, id: &str) -> usize {
        let before = self.obstacles.len();
        self.obstacles.retain(|o| o.id.as_deref() != Some(id));
        before - self.obstacles.len()
    }

    /// Stop emitting ulc reports until `until` (heartbeat loss).
    pub fn suppress_ulc_until(&mut self, until: f64) {
        self.ulc_suppressed_until = until;
    }

    /// Flip a safety flag. Engaging any of them drops out of by-wire mode,
    /// which only a reset brings back.
    pub fn inject_override(&mut self, kind: OverrideKind, on: bool) {
        let flag = match kind {
            OverrideKind::Steering => &mut self.state.override_steering,
            OverrideKind::Pedals => &mut self.state.override_pedals,
            OverrideKind::PhysicalEstop => &mut self.state.physical_estop,
        };
        *flag = on;
        if on {
            self.state.dbw_enabled = false;
        }
    }

    /// Re-enable by-wire control if no override is still held.
    pub fn re_enable(&mut self) -> bool {
        let s = &mut self.state;
        if !(s.override_steering || s.override_pedals || s.physical_estop) {
            s.dbw_enabled = true;
        }
        s.dbw_enabled
    }

    fn ticks_per(&self, rate: f64) -> u64 {
        (self.cfg.tick_hz / rate).round().max(1.0) as u64
    }

    /// Integrate one tick at time `now` (the end of the step) and publish the
    /// sensor outputs due this tick.
    pub fn step(&mut self, bus: &mut Bus, now: f64) -> Result<(), BusError> {
        if std::mem::take(&mut self.reset_requested) {
            self.re_enable();
        }
        let cmd = match self.last_cmd {
            Some((t, at)) if now - at <= self.cfg.cmd_timeout => t,
            _ => Twist::ZERO,
        };
        if self.ticks > 0 {
            self.state = tick(&self.state, cmd, self.cfg.dt(), &self.cfg);
        }

        if now >= self.ulc_suppressed_until {
            bus.publish(topics::ULC_REPORT, ulc_report(&self.state, now), now)?;
        }

        if self
            .ticks
            .is_multiple_of(self.ticks_per(self.cfg.gps_rate_hz))
        {
            let mut epoch = sample_gps(
                &self.state,
                self.gps_mode,
                self.base,
                now,
                &self.cfg,
                &mut self.rng,
            );
            if epoch.best.quality != FixQuality::None {
                self.last_fix_time = Some(now);
            } else {
                epoch.best.age = self.last_fix_time.map_or(now, |t| now - t);
            }
            if let Some(s) = epoch.fix {
                bus.publish(topics::ENU_POSE_FIX, s, now)?;
            }
            if let Some(s) = epoch.spp {
                bus.publish(topics::ENU_POSE_SPP, s, now)?;
            }
            if let Some(h) = epoch.heading {
                bus.publish(topics::BASELINE_HEADING, h, now)?;
            }
            bus.publish(topics::NAVSATFIX_BEST_FIX, epoch.best, now)?;
        }

        if self
            .ticks
            .is_multiple_of(self.ticks_per(self.cfg.lidar_rate_hz))
        {
            bus.publish(
                topics::VELODYNE_POINTS,
                sample_lidar(&self.state, &self.obstacles),
                now,
            )?;
        }
        self.ticks += 1;
        Ok(())
    }
}
