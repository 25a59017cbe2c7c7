//! Topic names and their payload types.
//!
//! Names match the vehicle's ROS graph verbatim, including the trailing slash
//! on the point-and-go topic and the doubled `VelocityVelocity6D`. Topics under
//! `/ltu/` without a counterpart there are internal to this stack.

use super::MessageKind;

pub const CLOCK: &str = "/clock";

// drive path
pub const STEERING_SENSE: &str = "steering_sense";
pub const SPEED_SETPOINT: &str = "speed_setpoint";
pub const CURVATURE_SETPOINT: &str = "curvature_setpoint";
pub const GATED_SETPOINT: &str = "/ltu/gated_setpoint";
pub const CMD_VEL: &str = "polaris/vehicle/cmd_vel";

// sensors
pub const ENU_POSE_FIX: &str = "enu_pose_fix";
pub const ENU_POSE_SPP: &str = "enu_pose_spp";
pub const BASELINE_HEADING: &str = "baseline_heading";
pub const NAVSATFIX_BEST_FIX: &str = "navsatfix_best_fix";
pub const VELODYNE_POINTS: &str = "velodyne_points";

// localization
pub const ODOM: &str = "/odom";
pub const NEAR_FIELD_ODOM: &str = "/near_field_odom";
pub const FAR_FIELD_ODOM: &str = "/far_field_odom";
pub const UTM_ODOM: &str = "/utm_odom";
pub const VELOCITY_6D: &str = "VelocityVelocity6D";
pub const LOCALIZATION_STATUS: &str = "/ltu/localization_status";

// status and e-stop
pub const ULC_REPORT: &str = "polaris/vehicle/ulc_report";
pub const SAFETY_MONITOR_STATUS: &str = "safety_monitor_status";
pub const SAFETY_MONITOR_ESTOP: &str = "safety_monitor_estop";
pub const ESTOP_SENSE: &str = "estop_sense";
pub const ESTOP_RESET: &str = "/ltu/estop_reset";

// summon
pub const POINT_AND_GO: &str = "/ltu/point_and_go/";
pub const COMMAND_MOBILITY_MODE: &str = "/vms/command_mobilitymode";
pub const POINT_AND_GO_WAYPOINT: &str = "/behavior_manager/point_and_go_waypoint_iopv2";
pub const PLANNER_STATUS: &str = "/ltu/planner_status";

/// `(topic, payload kind, latched)` for every topic in the graph.
pub const REGISTRY: &[(&str, MessageKind, bool)] = &[
    (CLOCK, MessageKind::Clock, false),
    (STEERING_SENSE, MessageKind::Float64, true),
    (SPEED_SETPOINT, MessageKind::Float64, false),
    (CURVATURE_SETPOINT, MessageKind::Float64, false),
    (GATED_SETPOINT, MessageKind::SpeedCurvatureSetpoint, false),
    (CMD_VEL, MessageKind::Twist, false),
    (ENU_POSE_FIX, MessageKind::GpsFixSample, false),
    (ENU_POSE_SPP, MessageKind::GpsFixSample, false),
    (BASELINE_HEADING, MessageKind::BaselineHeading, false),
    (NAVSATFIX_BEST_FIX, MessageKind::BestFixStatus, false),
    (VELODYNE_POINTS, MessageKind::LidarScan, false),
    (ODOM, MessageKind::Odometry, false),
    (NEAR_FIELD_ODOM, MessageKind::Odometry, false),
    (FAR_FIELD_ODOM, MessageKind::Odometry, false),
    (UTM_ODOM, MessageKind::Odometry, false),
    (VELOCITY_6D, MessageKind::Velocity6D, false),
    (LOCALIZATION_STATUS, MessageKind::LocalizationStatus, true),
    (ULC_REPORT, MessageKind::UlcReport, false),
    (SAFETY_MONITOR_STATUS, MessageKind::SafetyStatus, false),
    (SAFETY_MONITOR_ESTOP, MessageKind::SafetyStatus, false),
    (ESTOP_SENSE, MessageKind::Bool, false),
    (ESTOP_RESET, MessageKind::Empty, false),
    (POINT_AND_GO, MessageKind::PointAndGo, false),
    (COMMAND_MOBILITY_MODE, MessageKind::MobilityMode, true),
    (POINT_AND_GO_WAYPOINT, MessageKind::Waypoint, true),
    (PLANNER_STATUS, MessageKind::PlannerStatus, true),
];

pub fn kind_of(topic: &str) -> Option<MessageKind> {
    REGISTRY
        .iter()
        .find(|(name, _, _)| *name == topic)
        .map(|(_, kind, _)| *kind)
}
