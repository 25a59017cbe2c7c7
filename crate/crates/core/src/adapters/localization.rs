use std::cell::RefCell;
use std::rc::Rc;

use crate::bus::{emit, Bus, BusError, Outbox};
use crate::messages::{
    angle_diff, topics, BestFixStatus, FixQuality, LocalizationStatus, Message, Odometry,
    PlanarVelocity, Pose2D, Velocity6D,
};

/// Republishes `/odom` unchanged on the near- and far-field topics.
#[derive(Debug, Default)]
pub struct OdomRepub {
    pub forwarded: u64,
}

impl OdomRepub {
    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::ODOM, false, move |env, out| {
            if let Message::Odometry(o) = &env.payload {
                emit(out, topics::NEAR_FIELD_ODOM, *o);
                emit(out, topics::FAR_FIELD_ODOM, *o);
                n.borrow_mut().forwarded += 1;
            }
        })?;
        Ok(node)
    }
}

/// Tracks which GPS source is trustworthy.
#[derive(Debug, Clone, PartialEq)]
pub struct FixSelectorState {
    pub last_rtk_time: Option<f64>,
    pub last_spp_time: Option<f64>,
    pub active: FixQuality,
    pub staleness_threshold: f64,
    receiver_quality: Option<FixQuality>,
}

impl FixSelectorState {
    pub fn new(staleness_threshold: f64) -> Self {
        Self {
            last_rtk_time: None,
            last_spp_time: None,
            active: FixQuality::None,
            staleness_threshold,
            receiver_quality: None,
        }
    }

    fn fresh(&self, t: Option<f64>, now: f64) -> bool {
        t.is_some_and(|t| now - t < self.staleness_threshold)
    }

    pub fn note_odometry(&mut self, o: &Odometry, now: f64) {
        match o.fix_type.quality() {
            FixQuality::Rtk => self.last_rtk_time = Some(now),
            FixQuality::Spp => self.last_spp_time = Some(now),
            FixQuality::None => {}
        }
    }

    /// The receiver's own verdict. Anything below RTK rules RTK out at once
    /// instead of waiting for staleness; an SPP-or-better report keeps SPP
    /// fresh even while RTK samples shadow the SPP stream.
    pub fn note_best(&mut self, b: &BestFixStatus, now: f64) {
        self.receiver_quality = Some(b.quality);
        if b.quality >= FixQuality::Spp && b.age < self.staleness_threshold {
            self.last_spp_time = Some(now);
        }
    }

    /// Recompute the active source. Returns true if it changed.
    pub fn update(&mut self, now: f64) -> bool {
        let rtk_ok = self.fresh(self.last_rtk_time, now)
            && self.receiver_quality.is_none_or(|q| q == FixQuality::Rtk);
        let next = if rtk_ok {
            FixQuality::Rtk
        } else if self.fresh(self.last_spp_time, now) {
            FixQuality::Spp
        } else {
            FixQuality::None
        };
        let changed = next != self.active;
        self.active = next;
        changed
    }
}

/// Builds [`Velocity6D`] from consecutive localized poses.
#[derive(Debug, Default, Clone)]
pub struct VelocityTracker {
    prev: Option<(Odometry, f64)>,
}

impl VelocityTracker {
    pub fn update(&mut self, o: &Odometry, now: f64) -> Velocity6D {
        let velocity = match self.prev {
            Some((p, t)) if now > t => {
                let dt = now - t;
                let (de, dn) = (o.easting - p.easting, o.northing - p.northing);
                let (s, c) = o.yaw.sin_cos();
                PlanarVelocity {
                    v_forward: (de * s + dn * c) / dt,
                    v_lateral: 0.0,
                    yaw_rate: angle_diff(o.yaw, p.yaw) / dt,
                }
            }
            _ => PlanarVelocity {
                v_forward: o.speed,
                v_lateral: 0.0,
                yaw_rate: 0.0,
            },
        };
        self.prev = Some((*o, now));
        Velocity6D {
            pose: Pose2D {
                easting: o.easting,
                northing: o.northing,
                yaw: o.yaw,
            },
            velocity,
        }
    }
}

/// Best-fix selecting localization with SPP fallback. Publishes the
/// localization context topics, `/utm_odom` and `VelocityVelocity6D`.
pub struct ActorLocalization {
    pub selector: FixSelectorState,
    velocity: VelocityTracker,
    status: Option<LocalizationStatus>,
    pub forwarded: u64,
    pub suppressed: u64,
}

impl ActorLocalization {
    pub fn new(staleness_threshold: f64) -> Self {
        Self {
            selector: FixSelectorState::new(staleness_threshold),
            velocity: VelocityTracker::default(),
            status: None,
            forwarded: 0,
            suppressed: 0,
        }
    }

    pub fn status(&self) -> LocalizationStatus {
        LocalizationStatus {
            active: self.selector.active,
            lost: self.selector.active == FixQuality::None,
        }
    }

    /// Status to publish if it differs from the last one published.
    fn status_change(&mut self) -> Option<LocalizationStatus> {
        let s = self.status();
        if self.status == Some(s) {
            return None;
        }
        self.status = Some(s);
        Some(s)
    }

    /// Returns the odometry to forward and its velocity, if the sample comes
    /// from the active source.
    pub fn on_odometry(&mut self, o: &Odometry, now: f64) -> Option<(Odometry, Velocity6D)> {
        self.selector.note_odometry(o, now);
        self.selector.update(now);
        if o.fix_type.quality() != self.selector.active || self.selector.active == FixQuality::None
        {
            self.suppressed += 1;
            return None;
        }
        self.forwarded += 1;
        Some((*o, self.velocity.update(o, now)))
    }

    pub fn on_best(&mut self, b: &BestFixStatus, now: f64) {
        self.selector.note_best(b, now);
        self.selector.update(now);
    }

    pub fn on_clock(&mut self, now: f64) {
        self.selector.update(now);
    }

    fn publish_status(&mut self, out: &mut Outbox<'_>) {
        if let Some(s) = self.status_change() {
            tracing::info!(active = ?s.active, lost = s.lost, "localization source");
            emit(out, topics::LOCALIZATION_STATUS, s);
        }
    }

    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::ODOM, false, move |env, out| {
            if let Message::Odometry(o) = &env.payload {
                let mut loc = n.borrow_mut();
                let fwd = loc.on_odometry(o, out.now());
                loc.publish_status(out);
                if let Some((o, v)) = fwd {
                    emit(out, topics::NEAR_FIELD_ODOM, o);
                    emit(out, topics::FAR_FIELD_ODOM, o);
                    emit(out, topics::UTM_ODOM, o);
                    emit(out, topics::VELOCITY_6D, v);
                }
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::NAVSATFIX_BEST_FIX, false, move |env, out| {
            if let Message::BestFixStatus(b) = &env.payload {
                let mut loc = n.borrow_mut();
                loc.on_best(b, out.now());
                loc.publish_status(out);
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::CLOCK, false, move |env, out| {
            if let Message::Clock(c) = &env.payload {
                let mut loc = n.borrow_mut();
                loc.on_clock(c.sim_time);
                loc.publish_status(out);
            }
        })?;
        Ok(node)
    }
}

/// Stand-in for the rest of the localization context when the plain
/// republisher runs: derives `VelocityVelocity6D` and a localization status
/// from `/near_field_odom`.
pub struct LocalizationContext {
    timeout: f64,
    velocity: VelocityTracker,
    last: Option<(FixQuality, f64)>,
    status: Option<LocalizationStatus>,
}

impl LocalizationContext {
    pub fn new(timeout: f64) -> Self {
        Self {
            timeout,
            velocity: VelocityTracker::default(),
            last: None,
            status: None,
        }
    }

    pub fn status(&self, now: f64) -> LocalizationStatus {
        match self.last {
            Some((q, t)) if now - t < self.timeout && q != FixQuality::None => LocalizationStatus {
                active: q,
                lost: false,
            },
            _ => LocalizationStatus {
                active: FixQuality::None,
                lost: true,
            },
        }
    }

    fn publish_status(&mut self, now: f64, out: &mut Outbox<'_>) {
        let s = self.status(now);
        if self.status != Some(s) {
            self.status = Some(s);
            emit(out, topics::LOCALIZATION_STATUS, s);
        }
    }

    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::NEAR_FIELD_ODOM, false, move |env, out| {
            if let Message::Odometry(o) = &env.payload {
                let mut ctx = n.borrow_mut();
                let now = out.now();
                ctx.last = Some((o.fix_type.quality(), now));
                ctx.publish_status(now, out);
                let v = ctx.velocity.update(o, now);
                emit(out, topics::VELOCITY_6D, v);
            }
        })?;
        let n = node.clone();
        bus.subscribe(topics::CLOCK, false, move |env, out| {
            if let Message::Clock(c) = &env.payload {
                n.borrow_mut().publish_status(c.sim_time, out);
            }
        })?;
        Ok(node)
    }
}
