use std::cell::RefCell;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::bus::{Bus, BusError};
use crate::geodesy::{utm_to_wgs84, GeoPoint, UtmPoint};
use crate::messages::{topics, FixQuality, Message, Odometry, Waypoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleFix {
    pub latitude: f64,
    pub longitude: f64,
    /// Compass heading, rad.
    pub heading: f64,
}

/// One line of the telemetry stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    /// `None` until the first localized pose.
    pub vehicle: Option<VehicleFix>,
    pub goal: Option<GeoPoint>,
    pub fix: FixQuality,
    pub estop: bool,
    pub arrived: bool,
    pub obstacles_nearby: bool,
    pub sim_time: f64,
}

/// Listens to the localization, goal, safety and lidar topics and builds
/// [`TelemetryFrame`]s on request.
#[derive(Debug)]
pub struct TelemetryCollector {
    pose: Option<Odometry>,
    goal: Option<Waypoint>,
    fix: FixQuality,
    estop: bool,
    arrived: bool,
    obstacles: bool,
}

impl Default for TelemetryCollector {
    fn default() -> Self {
        Self {
            pose: None,
            goal: None,
            fix: FixQuality::None,
            estop: false,
            arrived: false,
            obstacles: false,
        }
    }
}

impl TelemetryCollector {
    pub fn frame(&self, sim_time: f64) -> TelemetryFrame {
        let vehicle = self.pose.and_then(|o| {
            let p = utm_to_wgs84(UtmPoint {
                easting: o.easting,
                northing: o.northing,
                zone: o.utm_zone,
            })
            .ok()?;
            Some(VehicleFix {
                latitude: p.latitude,
                longitude: p.longitude,
                heading: o.yaw,
            })
        });
        let goal = self.goal.and_then(|w| {
            utm_to_wgs84(UtmPoint {
                easting: w.easting,
                northing: w.northing,
                zone: w.utm_zone,
            })
            .ok()
        });
        TelemetryFrame {
            vehicle,
            goal,
            fix: self.fix,
            estop: self.estop,
            arrived: self.arrived,
            obstacles_nearby: self.obstacles,
            sim_time,
        }
    }

    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::NEAR_FIELD_ODOM, false, move |env, _| {
            if let Message::Odometry(o) = env.payload {
                n.borrow_mut().pose = Some(o);
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::LOCALIZATION_STATUS, true, move |env, _| {
            if let Message::LocalizationStatus(s) = env.payload {
                n.borrow_mut().fix = if s.lost { FixQuality::None } else { s.active };
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::POINT_AND_GO_WAYPOINT, true, move |env, _| {
            if let Message::Waypoint(w) = env.payload {
                let mut t = n.borrow_mut();
                t.goal = Some(w);
                t.arrived = false;
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::PLANNER_STATUS, true, move |env, _| {
            if let Message::PlannerStatus(s) = env.payload {
                let mut t = n.borrow_mut();
                t.arrived = s.arrived;
                if !s.active {
                    t.goal = None;
                }
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::ESTOP_SENSE, false, move |env, _| {
            if let Message::Bool(on) = env.payload {
                n.borrow_mut().estop = on;
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::VELODYNE_POINTS, false, move |env, _| {
            if let Message::LidarScan(s) = &env.payload {
                n.borrow_mut().obstacles = !s.points.is_empty();
            }
        })?;
        Ok(node)
    }
}
