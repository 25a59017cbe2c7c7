use std::cell::RefCell;
use std::rc::Rc;

use crate::bus::{emit, Bus, BusError};
use crate::messages::{topics, LocalizationStatus, Message, SpeedCurvatureSetpoint, SteeringSense};

use super::safety::SafetyLatch;
use super::AdapterConfig;

/// Gate between planner setpoints and the drive-by-wire converter.
///
/// Speed and curvature arrive on separate topics; a curvature completes the
/// pair. The output is the input unless the e-stop latch is engaged or
/// localization is not valid, in which case it is a zero setpoint.
pub struct LowLevelController {
    latch: SafetyLatch,
    estop_sense: bool,
    sense: SteeringSense,
    pending_speed: Option<f64>,
    localization: Option<LocalizationStatus>,
    last_velocity: Option<f64>,
    localization_timeout: f64,
    pub gated: u64,
}

impl LowLevelController {
    pub fn new(cfg: &AdapterConfig) -> Self {
        Self {
            latch: SafetyLatch::new(f64::INFINITY, cfg.reset_window),
            estop_sense: false,
            sense: SteeringSense::Positive,
            pending_speed: None,
            localization: None,
            last_velocity: None,
            localization_timeout: cfg.localization_timeout,
            gated: 0,
        }
    }

    pub fn estopped(&self) -> bool {
        self.latch.estopped
    }

    pub fn localization_valid(&self, now: f64) -> bool {
        let status_ok = self.localization.is_some_and(|s| !s.lost);
        let fresh = self
            .last_velocity
            .is_some_and(|t| now - t <= self.localization_timeout);
        status_ok && fresh
    }

    /// Returns true if the latch newly engaged.
    pub fn on_estop_sense(&mut self, on: bool, now: f64) -> bool {
        self.estop_sense = on;
        if on {
            self.latch.trip("estop_sense")
        } else {
            self.latch.observe_nominal(now);
            false
        }
    }

    pub fn on_reset(&mut self, now: f64) {
        self.latch.request_reset(now, !self.estop_sense);
    }

    pub fn on_steering_sense(&mut self, value: f64) {
        match SteeringSense::from_sign(value) {
            Some(s) => self.sense = s,
            None => tracing::warn!(value, "ignoring invalid steering sense"),
        }
    }

    pub fn on_localization(&mut self, s: LocalizationStatus) {
        self.localization = Some(s);
    }

    pub fn on_velocity(&mut self, now: f64) {
        self.last_velocity = Some(now);
    }

    pub fn on_speed(&mut self, speed: f64) {
        self.pending_speed = Some(speed);
    }

    /// Completes a speed/curvature pair and returns the gated setpoint.
    pub fn on_curvature(&mut self, curvature: f64, now: f64) -> Option<SpeedCurvatureSetpoint> {
        let speed = self.pending_speed.take()?;
        Some(self.gate(
            SpeedCurvatureSetpoint {
                speed,
                curvature,
                steering_sense: self.sense,
            },
            now,
        ))
    }

    pub fn gate(&mut self, sp: SpeedCurvatureSetpoint, now: f64) -> SpeedCurvatureSetpoint {
        if self.latch.estopped || !self.localization_valid(now) {
            self.gated += 1;
            SpeedCurvatureSetpoint::stop(sp.steering_sense)
        } else {
            sp
        }
    }

    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::ESTOP_SENSE, false, move |env, out| {
            if let Message::Bool(on) = env.payload {
                let mut llc = n.borrow_mut();
                if llc.on_estop_sense(on, out.now()) {
                    emit(
                        out,
                        topics::GATED_SETPOINT,
                        SpeedCurvatureSetpoint::stop(llc.sense),
                    );
                }
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::ESTOP_RESET, false, move |_, out| {
            n.borrow_mut().on_reset(out.now());
        })?;
        let n = node.clone();
        bus.subscribe(topics::STEERING_SENSE, true, move |env, _| {
            if let Message::Float64(v) = env.payload {
                n.borrow_mut().on_steering_sense(v);
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::LOCALIZATION_STATUS, true, move |env, _| {
            if let Message::LocalizationStatus(s) = env.payload {
                n.borrow_mut().on_localization(s);
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::VELOCITY_6D, false, move |_, out| {
            n.borrow_mut().on_velocity(out.now());
        })?;
        let n = node.clone();
        bus.subscribe(topics::SPEED_SETPOINT, false, move |env, _| {
            if let Message::Float64(v) = env.payload {
                n.borrow_mut().on_speed(v);
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::CURVATURE_SETPOINT, false, move |env, out| {
            if let Message::Float64(k) = env.payload {
                if let Some(sp) = n.borrow_mut().on_curvature(k, out.now()) {
                    emit(out, topics::GATED_SETPOINT, sp);
                }
            }
        })?;
        Ok(node)
    }
}
