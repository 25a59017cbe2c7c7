use std::cell::RefCell;
use std::rc::Rc;

use crate::bus::{emit, Bus, BusError};
use crate::messages::{topics, Message, SafetyStatus, UlcReport};

use super::AdapterConfig;

pub const REASON_STEERING: &str = "steering override";
pub const REASON_PEDALS: &str = "pedal override";
pub const REASON_DBW: &str = "dbw disabled";
pub const REASON_HEARTBEAT: &str = "heartbeat lost";

/// E-stop latch. Once tripped it stays tripped until a reset is requested
/// while the monitored condition is nominal.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyLatch {
    pub estopped: bool,
    pub reason: String,
    pub last_heartbeat: Option<f64>,
    pub heartbeat_timeout: f64,
    reset_armed_at: Option<f64>,
    reset_window: f64,
}

impl SafetyLatch {
    pub fn new(heartbeat_timeout: f64, reset_window: f64) -> Self {
        Self {
            estopped: false,
            reason: String::new(),
            last_heartbeat: None,
            heartbeat_timeout,
            reset_armed_at: None,
            reset_window,
        }
    }

    /// Returns true if this call engaged the latch.
    pub fn trip(&mut self, reason: &str) -> bool {
        if self.estopped {
            return false;
        }
        self.reset_armed_at = None;
        self.estopped = true;
        self.reason = reason.to_string();
        true
    }

    /// Reset request. Clears at once if `nominal`, otherwise waits up to the
    /// reset window for [`SafetyLatch::observe_nominal`].
    pub fn request_reset(&mut self, now: f64, nominal: bool) {
        if !self.estopped {
            return;
        }
        if nominal {
            self.clear();
        } else {
            self.reset_armed_at = Some(now);
        }
    }

    /// A nominal observation; completes a pending reset. Returns true if the
    /// latch cleared.
    pub fn observe_nominal(&mut self, now: f64) -> bool {
        match self.reset_armed_at {
            Some(t) if self.estopped && now - t <= self.reset_window => {
                self.clear();
                true
            }
            _ => false,
        }
    }

    fn clear(&mut self) {
        self.estopped = false;
        self.reason.clear();
        self.reset_armed_at = None;
    }

    pub fn heartbeat_lost(&self, now: f64) -> bool {
        self.last_heartbeat
            .is_some_and(|t| now - t > self.heartbeat_timeout)
    }

    pub fn status(&self) -> SafetyStatus {
        SafetyStatus {
            ok: !self.estopped,
            estop_active: self.estopped,
            reason: self.reason.clone(),
        }
    }
}

/// The fault carried by a report, if any.
pub fn report_fault(r: &UlcReport) -> Option<&'static str> {
    if r.override_steering {
        Some(REASON_STEERING)
    } else if r.override_pedals {
        Some(REASON_PEDALS)
    } else if !r.dbw_enabled {
        Some(REASON_DBW)
    } else {
        None
    }
}

/// Watches ulc reports and publishes the safety monitor topics and
/// `estop_sense`.
pub struct EstopHeartbeat {
    pub latch: SafetyLatch,
    last_fault: Option<&'static str>,
}

impl EstopHeartbeat {
    pub fn new(cfg: &AdapterConfig) -> Self {
        Self {
            latch: SafetyLatch::new(cfg.heartbeat_timeout, cfg.reset_window),
            last_fault: None,
        }
    }

    pub fn on_report(&mut self, r: &UlcReport, now: f64) {
        self.latch.last_heartbeat = Some(now);
        self.last_fault = report_fault(r);
        match self.last_fault {
            Some(reason) => {
                self.latch.trip(reason);
            }
            None => {
                self.latch.observe_nominal(now);
            }
        }
    }

    /// Checks the heartbeat gap. Returns true if the latch tripped.
    pub fn on_clock(&mut self, now: f64) -> bool {
        self.latch.heartbeat_lost(now) && self.latch.trip(REASON_HEARTBEAT)
    }

    pub fn on_reset(&mut self, now: f64) {
        let nominal = self.last_fault.is_none() && !self.latch.heartbeat_lost(now);
        self.latch.request_reset(now, nominal);
    }

    pub fn estop_sense(&self) -> bool {
        self.latch.estopped
    }

    fn publish(&self, out: &mut crate::bus::Outbox<'_>) {
        let status = self.latch.status();
        emit(out, topics::SAFETY_MONITOR_STATUS, status.clone());
        emit(out, topics::SAFETY_MONITOR_ESTOP, status);
        emit(out, topics::ESTOP_SENSE, self.estop_sense());
    }

    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::ULC_REPORT, false, move |env, out| {
            if let Message::UlcReport(r) = &env.payload {
                let mut hb = n.borrow_mut();
                hb.on_report(r, out.now());
                hb.publish(out);
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::CLOCK, false, move |env, out| {
            if let Message::Clock(c) = &env.payload {
                let mut hb = n.borrow_mut();
                if hb.on_clock(c.sim_time) {
                    tracing::warn!(t = c.sim_time, "ulc heartbeat lost");
                    hb.publish(out);
                }
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::ESTOP_RESET, false, move |_, out| {
            let mut hb = n.borrow_mut();
            let was = hb.estop_sense();
            hb.on_reset(out.now());
            if was && !hb.estop_sense() {
                hb.publish(out);
            }
        })?;
        Ok(node)
    }
}
