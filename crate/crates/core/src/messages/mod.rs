//! Message vocabulary shared by every node in the graph.
//!
//! Headings are compass-style everywhere in this module: 0 is north and the
//! angle grows clockwise, in radians within `[0, 2π)`. The one exception is
//! [`Twist::angular_z`], which keeps the ROS convention (counter-clockwise
//! positive) because it is the drive-by-wire command interface.

pub mod topics;
pub mod wire;

use serde::{Deserialize, Serialize};

use crate::geodesy::UtmZone;

pub use wire::{decode_wire, encode_wire, WireError, WireSummon};

/// Mobility mode string that the summon path translates into mode 14.
pub const GO_TO_WAYPOINT: &str = "go to waypoint";

/// Fold an angle into the compass range `[0, 2π)`.
pub fn normalize_compass(angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let wrapped = angle.rem_euclid(tau);
    // rem_euclid can round up to exactly tau for tiny negative inputs
    if wrapped >= tau {
        0.0
    } else {
        wrapped
    }
}

/// Signed smallest difference `a - b` between two angles, in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    if d > pi {
        d - std::f64::consts::TAU
    } else {
        d
    }
}

/// Planar drive-by-wire command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    /// Forward speed, m/s.
    pub linear_x: f64,
    /// Yaw rate, rad/s, counter-clockwise (left turn) positive.
    pub angular_z: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist {
        linear_x: 0.0,
        angular_z: 0.0,
    };
}

/// Sign convention applied to curvature on the planner side of the command path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum SteeringSense {
    #[default]
    Positive,
    Negative,
}

impl SteeringSense {
    pub fn sign(self) -> f64 {
        match self {
            SteeringSense::Positive => 1.0,
            SteeringSense::Negative => -1.0,
        }
    }

    pub fn from_sign(value: f64) -> Option<Self> {
        if value == 1.0 {
            Some(SteeringSense::Positive)
        } else if value == -1.0 {
            Some(SteeringSense::Negative)
        } else {
            None
        }
    }
}

impl From<SteeringSense> for i8 {
    fn from(s: SteeringSense) -> i8 {
        match s {
            SteeringSense::Positive => 1,
            SteeringSense::Negative => -1,
        }
    }
}

impl TryFrom<i8> for SteeringSense {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(SteeringSense::Positive),
            -1 => Ok(SteeringSense::Negative),
            other => Err(format!("steering sense must be +1 or -1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedCurvatureSetpoint {
    /// m/s
    pub speed: f64,
    /// 1/m, positive bends toward the left when the sense is positive.
    pub curvature: f64,
    pub steering_sense: SteeringSense,
}

impl SpeedCurvatureSetpoint {
    pub fn stop(steering_sense: SteeringSense) -> Self {
        Self {
            speed: 0.0,
            curvature: 0.0,
            steering_sense,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.speed.is_finite() && self.curvature.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixType {
    #[serde(rename = "RTK_FIX")]
    RtkFix,
    #[serde(rename = "SPP")]
    Spp,
    #[serde(rename = "NONE")]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FixQuality {
    #[serde(rename = "NONE")]
    None,
    #[serde(rename = "SPP")]
    Spp,
    #[serde(rename = "RTK")]
    Rtk,
}

impl FixType {
    pub fn quality(self) -> FixQuality {
        match self {
            FixType::RtkFix => FixQuality::Rtk,
            FixType::Spp => FixQuality::Spp,
            FixType::None => FixQuality::None,
        }
    }
}

/// Localized pose and speed in UTM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Odometry {
    pub easting: f64,
    pub northing: f64,
    pub utm_zone: UtmZone,
    /// Compass heading, rad.
    pub yaw: f64,
    pub speed: f64,
    pub fix_type: FixType,
    pub position_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub easting: f64,
    pub northing: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarVelocity {
    pub v_forward: f64,
    pub v_lateral: f64,
    /// Compass yaw rate (clockwise positive), rad/s.
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Velocity6D {
    pub pose: Pose2D,
    pub velocity: PlanarVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GpsFixKind {
    #[serde(rename = "ENU_FIX")]
    EnuFix,
    #[serde(rename = "ENU_SPP")]
    EnuSpp,
}

/// Position sample in the base station's east/north frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFixSample {
    pub kind: GpsFixKind,
    pub east: f64,
    pub north: f64,
    pub sigma: f64,
    pub sim_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineHeading {
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestFixStatus {
    pub quality: FixQuality,
    pub age: f64,
}

/// Summon goal as handed from the web service to the point-and-go node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAndGo {
    pub latitude: f64,
    pub longitude: f64,
    pub mobility_mode: String,
}

impl PointAndGo {
    pub fn go_to_waypoint(latitude: f64, longitude: f64) -> Result<Self, WireError> {
        Self::new(latitude, longitude, GO_TO_WAYPOINT)
    }

    pub fn new(latitude: f64, longitude: f64, mobility_mode: &str) -> Result<Self, WireError> {
        wire::check_lat_lon(latitude, longitude)?;
        if mobility_mode.is_empty() {
            return Err(WireError::EmptyMobilityMode);
        }
        Ok(Self {
            latitude,
            longitude,
            mobility_mode: mobility_mode.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MobilityMode {
    #[serde(rename = "mobilityMode")]
    pub mobility_mode: i32,
    #[serde(rename = "idleReason")]
    pub idle_reason: i32,
}

impl MobilityMode {
    /// The only defined mode: drive to the active waypoint.
    pub const WAYPOINT: i32 = 14;

    pub fn go_to_waypoint() -> Self {
        Self {
            mobility_mode: Self::WAYPOINT,
            idle_reason: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub easting: f64,
    pub northing: f64,
    pub utm_zone: UtmZone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlcReport {
    pub measured_speed: f64,
    pub dbw_enabled: bool,
    pub override_steering: bool,
    pub override_pedals: bool,
    pub sim_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyStatus {
    pub ok: bool,
    pub estop_active: bool,
    pub reason: String,
}

/// Point in the vehicle frame: x forward, y left, z up (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LidarScan {
    pub points: Vec<LidarPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    pub sim_time: f64,
}

/// Which GPS source localization currently trusts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationStatus {
    pub active: FixQuality,
    pub lost: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerStatus {
    pub active: bool,
    pub arrived: bool,
    pub blocked: bool,
    pub distance_to_goal: Option<f64>,
}

/// Every payload that can travel on the bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Message {
    Empty,
    Bool(bool),
    Float64(f64),
    Clock(Clock),
    Twist(Twist),
    SpeedCurvatureSetpoint(SpeedCurvatureSetpoint),
    Odometry(Odometry),
    Velocity6D(Velocity6D),
    GpsFixSample(GpsFixSample),
    BaselineHeading(BaselineHeading),
    BestFixStatus(BestFixStatus),
    PointAndGo(PointAndGo),
    MobilityMode(MobilityMode),
    Waypoint(Waypoint),
    UlcReport(UlcReport),
    SafetyStatus(SafetyStatus),
    LidarScan(LidarScan),
    LocalizationStatus(LocalizationStatus),
    PlannerStatus(PlannerStatus),
}

/// Discriminant of [`Message`], used to type topics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    Empty,
    Bool,
    Float64,
    Clock,
    Twist,
    SpeedCurvatureSetpoint,
    Odometry,
    Velocity6D,
    GpsFixSample,
    BaselineHeading,
    BestFixStatus,
    PointAndGo,
    MobilityMode,
    Waypoint,
    UlcReport,
    SafetyStatus,
    LidarScan,
    LocalizationStatus,
    PlannerStatus,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Empty => MessageKind::Empty,
            Message::Bool(_) => MessageKind::Bool,
            Message::Float64(_) => MessageKind::Float64,
            Message::Clock(_) => MessageKind::Clock,
            Message::Twist(_) => MessageKind::Twist,
            Message::SpeedCurvatureSetpoint(_) => MessageKind::SpeedCurvatureSetpoint,
            Message::Odometry(_) => MessageKind::Odometry,
            Message::Velocity6D(_) => MessageKind::Velocity6D,
            Message::GpsFixSample(_) => MessageKind::GpsFixSample,
            Message::BaselineHeading(_) => MessageKind::BaselineHeading,
            Message::BestFixStatus(_) => MessageKind::BestFixStatus,
            Message::PointAndGo(_) => MessageKind::PointAndGo,
            Message::MobilityMode(_) => MessageKind::MobilityMode,
            Message::Waypoint(_) => MessageKind::Waypoint,
            Message::UlcReport(_) => MessageKind::UlcReport,
            Message::SafetyStatus(_) => MessageKind::SafetyStatus,
            Message::LidarScan(_) => MessageKind::LidarScan,
            Message::LocalizationStatus(_) => MessageKind::LocalizationStatus,
            Message::PlannerStatus(_) => MessageKind::PlannerStatus,
        }
    }
}

macro_rules! impl_from_payload {
    ($($variant:ident),* $(,)?) => {
        $(
            impl From<$variant> for Message {
                fn from(m: $variant) -> Message {
                    Message::$variant(m)
                }
            }
        )*
    };
}

impl_from_payload!(
    Clock,
    Twist,
    SpeedCurvatureSetpoint,
    Odometry,
    Velocity6D,
    GpsFixSample,
    BaselineHeading,
    BestFixStatus,
    PointAndGo,
    MobilityMode,
    Waypoint,
    UlcReport,
    SafetyStatus,
    LidarScan,
    LocalizationStatus,
    PlannerStatus,
);

impl From<bool> for Message {
    fn from(b: bool) -> Message {
        Message::Bool(b)
    }
}

impl From<f64> for Message {
    fn from(v: f64) -> Message {
        Message::Float64(v)
    }
}
