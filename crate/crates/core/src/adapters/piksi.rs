use std::cell::RefCell;
use std::rc::Rc;

use crate::bus::{emit, Bus, BusError};
use crate::geodesy::UtmPoint;
use crate::messages::{topics, FixType, GpsFixKind, GpsFixSample, Message, Odometry};

const MIN_SIGMA: f64 = 1e-3;

/// Fuses receiver position samples and the baseline heading into `/odom`.
///
/// Samples are east/north offsets from the base station; the output is in
/// the base station's UTM zone. RTK fixes win over SPP samples that arrive
/// within the preference window.
pub struct PiksiOdomPub {
    base: UtmPoint,
    preference_window: f64,
    heading: Option<f64>,
    last_fix: Option<GpsFixSample>,
    last_spp: Option<GpsFixSample>,
    fix_speed: f64,
    spp_speed: f64,
}

impl PiksiOdomPub {
    pub fn new(base: UtmPoint, preference_window: f64) -> Self {
        Self {
            base,
            preference_window,
            heading: None,
            last_fix: None,
            last_spp: None,
            fix_speed: 0.0,
            spp_speed: 0.0,
        }
    }

    pub fn on_heading(&mut self, heading: f64) {
        self.heading = Some(heading);
    }

    /// Odometry for this sample, or `None` while no heading has been seen or
    /// when an SPP sample is shadowed by a recent RTK fix.
    pub fn on_sample(&mut self, s: &GpsFixSample) -> Option<Odometry> {
        let (prev, speed) = match s.kind {
            GpsFixKind::EnuFix => (&mut self.last_fix, &mut self.fix_speed),
            GpsFixKind::EnuSpp => (&mut self.last_spp, &mut self.spp_speed),
        };
        if let Some(p) = prev {
            let dt = s.sim_time - p.sim_time;
            if dt > 0.0 {
                *speed = (s.east - p.east).hypot(s.north - p.north) / dt;
            }
        }
        *prev = Some(*s);
        let speed = *speed;

        if s.kind == GpsFixKind::EnuSpp {
            if let Some(f) = &self.last_fix {
                if s.sim_time - f.sim_time < self.preference_window {
                    return None;
                }
            }
        }
        let yaw = self.heading?;
        Some(Odometry {
            easting: self.base.easting + s.east,
            northing: self.base.northing + s.north,
            utm_zone: self.base.zone,
            yaw,
            speed,
            fix_type: match s.kind {
                GpsFixKind::EnuFix => FixType::RtkFix,
                GpsFixKind::EnuSpp => FixType::Spp,
            },
            position_sigma: s.sigma.max(MIN_SIGMA),
        })
    }

    pub fn attach(self, bus: &mut Bus) -> Result<Rc<RefCell<Self>>, BusError> {
        let node = Rc::new(RefCell::new(self));
        let n = node.clone();
        bus.subscribe(topics::BASELINE_HEADING, false, move |env, _| {
            if let Message::BaselineHeading(h) = &env.payload {
                n.borrow_mut().on_heading(h.heading);
            }
        })?;
        for topic in [topics::ENU_POSE_FIX, topics::ENU_POSE_SPP] {
            let n = node.clone();
            bus.subscribe(topic, false, move |env, out| {
                if let Message::GpsFixSample(s) = &env.payload {
                    if let Some(o) = n.borrow_mut().on_sample(s) {
                        emit(out, topics::ODOM, o);
                    }
                }
            })?;
        }
        Ok(node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{Hemisphere, UtmZone};
    use std::f64::consts::FRAC_PI_2;

    fn base() -> UtmPoint {
        UtmPoint {
            easting: 315_000.0,
            northing: 4_704_000.0,
            zone: UtmZone {
                number: 17,
                hemisphere: Hemisphere::N,
            },
        }
    }

    fn sample(kind: GpsFixKind, east: f64, north: f64, t: f64) -> GpsFixSample {
        GpsFixSample {
            kind,
            east,
            north,
            sigma: if kind == GpsFixKind::EnuFix {
                0.02
            } else {
                1.5
            },
            sim_time: t,
        }
    }

    #[test]
    fn passes_fix_through_with_heading() {
        let mut p = PiksiOdomPub::new(base(), 0.2);
        p.on_heading(FRAC_PI_2);
        let o = p
            .on_sample(&sample(GpsFixKind::EnuFix, 10.0, 20.0, 0.0))
            .unwrap();
        assert_eq!((o.easting, o.northing), (315_010.0, 4_704_020.0));
        assert_eq!(o.yaw, FRAC_PI_2);
        assert_eq!(o.fix_type, FixType::RtkFix);
        assert_eq!(o.position_sigma, 0.02);
    }

    #[test]
    fn withholds_without_heading() {
        let mut p = PiksiOdomPub::new(base(), 0.2);
        assert!(p
            .on_sample(&sample(GpsFixKind::EnuFix, 0.0, 0.0, 0.0))
            .is_none());
    }

    #[test]
    fn spp_only_yields_spp() {
        let mut p = PiksiOdomPub::new(base(), 0.2);
        p.on_heading(0.0);
        let o = p
            .on_sample(&sample(GpsFixKind::EnuSpp, 1.0, 1.0, 0.0))
            .unwrap();
        assert_eq!(o.fix_type, FixType::Spp);
    }

    #[test]
    fn recent_fix_shadows_spp() {
        let mut p = PiksiOdomPub::new(base(), 0.2);
        p.on_heading(0.0);
        assert!(p
            .on_sample(&sample(GpsFixKind::EnuFix, 0.0, 0.0, 1.0))
            .is_some());
        assert!(p
            .on_sample(&sample(GpsFixKind::EnuSpp, 0.0, 0.0, 1.0))
            .is_none());
        assert!(p
            .on_sample(&sample(GpsFixKind::EnuSpp, 0.0, 0.0, 1.3))
            .is_some());
    }

    #[test]
    fn finite_difference_speed() {
        let mut p = PiksiOdomPub::new(base(), 0.2);
        p.on_heading(0.0);
        p.on_sample(&sample(GpsFixKind::EnuFix, 0.0, 0.0, 0.0));
        let o = p
            .on_sample(&sample(GpsFixKind::EnuFix, 0.0, 1.0, 0.1))
            .unwrap();
        assert!((o.speed - 10.0).abs() < 1e-9);
    }
}
