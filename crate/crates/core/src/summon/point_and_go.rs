use std::cell::RefCell;
use std::rc::Rc;

use crate::bus::{emit, Bus, BusError};
use crate::geodesy::{wgs84_to_utm, GeoPoint, GeodesyError};
use crate::messages::{topics, Message, MobilityMode, PointAndGo, Waypoint, GO_TO_WAYPOINT};

/// Mobility mode and UTM waypoint for a summon, or `None` if the mode string
/// is not one we know.
pub fn translate(p: &PointAndGo) -> Result<Option<(MobilityMode, Waypoint)>, GeodesyError> {
    if p.mobility_mode != GO_TO_WAYPOINT {
        return Ok(None);
    }
    let utm = wgs84_to_utm(GeoPoint::new(p.latitude, p.longitude))?;
    Ok(Some((
        MobilityMode::go_to_waypoint(),
        Waypoint {
            easting: utm.easting,
            northing: utm.northing,
            utm_zone: utm.zone,
        },
    )))
}

/// Turns `/ltu/point_and_go/` into a mobility mode command followed by the
/// waypoint.
#[derive(Debug, Default)]
pub struct PointAndGoNode {
    pub translated: u64,
    pub ignored: u64,
}

impl PointAndGoNode {
    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::POINT_AND_GO, false, move |env, out| {
            let Message::PointAndGo(p) = &env.payload else {
                return;
            };
            match translate(p) {
                Ok(Some((mode, wp))) => {
                    emit(out, topics::COMMAND_MOBILITY_MODE, mode);
                    emit(out, topics::POINT_AND_GO_WAYPOINT, wp);
                    n.borrow_mut().translated += 1;
                }
                Ok(None) => {
                    tracing::warn!(mode = %p.mobility_mode, "unrecognized mobility mode");
                    n.borrow_mut().ignored += 1;
                }
                Err(e) => {
                    tracing::warn!(%e, "summon point cannot be projected");
                    n.borrow_mut().ignored += 1;
                }
            }
        })?;
        Ok(node)
    }
}
