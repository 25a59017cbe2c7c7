use std::cell::RefCell;
use std::rc::Rc;

use crate::bus::{emit, Bus, BusError};
use crate::messages::{topics, Message, SpeedCurvatureSetpoint, Twist};

/// `linear_x = speed`, `angular_z = sense · speed · curvature`.
///
/// Returns `None` for non-finite input.
pub fn speed_curv_to_twist(sp: &SpeedCurvatureSetpoint) -> Option<Twist> {
    if !sp.is_finite() {
        return None;
    }
    Some(Twist {
        linear_x: sp.speed,
        angular_z: sp.steering_sense.sign() * sp.speed * sp.curvature,
    })
}

/// Converts gated setpoints into drive-by-wire commands, clamped to the
/// vehicle envelope.
pub struct SpeedCurvToTwist {
    max_speed: f64,
    max_curvature: f64,
    dropped: u64,
}

impl SpeedCurvToTwist {
    pub fn new(max_speed: f64, max_curvature: f64) -> Self {
        Self {
            max_speed,
            max_curvature,
            dropped: 0,
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn convert(&mut self, sp: &SpeedCurvatureSetpoint) -> Option<Twist> {
        let Some(mut t) = speed_curv_to_twist(sp) else {
            self.dropped += 1;
            tracing::warn!(?sp, "dropping non-finite setpoint");
            return None;
        };
        t.linear_x = t.linear_x.clamp(-self.max_speed, self.max_speed);
        let w = self.max_speed * self.max_curvature;
        t.angular_z = t.angular_z.clamp(-w, w);
        Some(t)
    }

    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::GATED_SETPOINT, false, move |env, out| {
            if let Message::SpeedCurvatureSetpoint(sp) = &env.payload {
                if let Some(t) = n.borrow_mut().convert(sp) {
                    emit(out, topics::CMD_VEL, t);
                }
            }
        })?;
        Ok(node)
    }
}
