//! WGS84 ↔ UTM conversion and dual-antenna heading.
//!
//! The projection is the Krüger series for the transverse Mercator, carried to
//! sixth order in the third flattening `n`. Within a UTM zone its truncation
//! error is far below a millimetre, and the forward and inverse series agree
//! to well under a nanodegree.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::messages::normalize_compass;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const UTM_K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
/// Latitude limit of the UTM band, degrees.
pub const UTM_MAX_LATITUDE: f64 = 84.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesyError {
    #[error("latitude {0}° is outside the UTM band (±84°)")]
    OutOfBand(f64),
    #[error("longitude {0}° is outside [-180, 180]")]
    InvalidLongitude(f64),
    #[error("easting {0} m is outside (100000, 900000)")]
    EastingOutOfRange(f64),
    #[error("northing {0} m is outside [0, 10000000)")]
    NorthingOutOfRange(f64),
    #[error("UTM zone {0} is outside 1..=60")]
    InvalidZone(u8),
    #[error("baseline vector is zero; heading undefined")]
    DegenerateBaseline,
    #[error("point lies in UTM zone {found}, run is confined to {expected}")]
    ZoneMismatch { expected: UtmZone, found: UtmZone },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        Self {
            latitude,
            longitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hemisphere {
    N,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtmZone {
    pub number: u8,
    pub hemisphere: Hemisphere,
}

impl fmt::Display for UtmZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.number, self.hemisphere)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtmPoint {
    pub easting: f64,
    pub northing: f64,
    pub zone: UtmZone,
}

/// Series constants derived once from the ellipsoid.
struct Kruger {
    e: f64,
    /// Rectifying radius scaled by k0.
    k0_a: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

fn kruger() -> &'static Kruger {
    use std::sync::OnceLock;
    static K: OnceLock<Kruger> = OnceLock::new();
    K.get_or_init(|| {
        let f = WGS84_F;
        let n = f / (2.0 - f);
        let (n2, n3) = (n * n, n * n * n);
        let (n4, n5, n6) = (n3 * n, n3 * n2, n3 * n3);
        let rectifying = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0
                + 7891.0 * n6 / 37800.0,
            13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0
                - 1983433.0 * n6 / 1935360.0,
            61.0 * n3 / 240.0 - 103.0 * n4 / 140.0
                + 15061.0 * n5 / 26880.0
                + 167603.0 * n6 / 181440.0,
            49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
            34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
            212378941.0 * n6 / 319334400.0,
        ];
        let beta = [
            n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0
                + 96199.0 * n6 / 604800.0,
            n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0
                - 1118711.0 * n6 / 3870720.0,
            17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
            4397.0 * n4 / 161280.0 - 11.0 * n5 / 504.0 - 830251.0 * n6 / 7257600.0,
            4583.0 * n5 / 161280.0 - 108847.0 * n6 / 3991680.0,
            20648693.0 * n6 / 638668800.0,
        ];
        Kruger {
            e: (f * (2.0 - f)).sqrt(),
            k0_a: UTM_K0 * rectifying,
            alpha,
            beta,
        }
    })
}

/// Wrap a longitude into `[-180, 180)`.
fn wrap_longitude(lon: f64) -> f64 {
    (lon + 180.0).rem_euclid(360.0) - 180.0
}

/// UTM zone number for a longitude: `floor((lon + 180) / 6) + 1`.
pub fn zone_number(longitude: f64) -> u8 {
    let z = ((wrap_longitude(longitude) + 180.0) / 6.0).floor() as i64 + 1;
    z.clamp(1, 60) as u8
}

pub fn zone_of(p: GeoPoint) -> UtmZone {
    UtmZone {
        number: zone_number(p.longitude),
        hemisphere: if p.latitude < 0.0 {
            Hemisphere::S
        } else {
            Hemisphere::N
        },
    }
}

fn central_meridian(zone: u8) -> f64 {
    zone as f64 * 6.0 - 183.0
}

/// Conformal latitude tangent τ' from geodetic tangent τ.
fn conformal_tan(tau: f64, e: f64) -> f64 {
    let tau1 = tau.hypot(1.0);
    let sig = (e * (e * tau / tau1).atanh()).sinh();
    tau * sig.hypot(1.0) - sig * tau1
}

fn check_geo(p: GeoPoint) -> Result<(), GeodesyError> {
    if !p.latitude.is_finite() || p.latitude.abs() > UTM_MAX_LATITUDE {
        return Err(GeodesyError::OutOfBand(p.latitude));
    }
    if !p.longitude.is_finite() || p.longitude.abs() > 180.0 {
        return Err(GeodesyError::InvalidLongitude(p.longitude));
    }
    Ok(())
}

/// Project into the point's own UTM zone.
pub fn wgs84_to_utm(p: GeoPoint) -> Result<UtmPoint, GeodesyError> {
    check_geo(p)?;
    project(p, zone_of(p))
}

/// Project into a fixed zone, failing when the point belongs to another one.
pub fn wgs84_to_utm_confined(p: GeoPoint, zone: UtmZone) -> Result<UtmPoint, GeodesyError> {
    check_geo(p)?;
    let found = zone_of(p);
    if found != zone {
        return Err(GeodesyError::ZoneMismatch {
            expected: zone,
            found,
        });
    }
    project(p, zone)
}

fn project(p: GeoPoint, zone: UtmZone) -> Result<UtmPoint, GeodesyError> {
    let k = kruger();
    let phi = p.latitude.to_radians();
    let lam = wrap_longitude(p.longitude - central_meridian(zone.number)).to_radians();

    let tau = phi.tan();
    let taup = conformal_tan(tau, k.e);
    let (sin_l, cos_l) = lam.sin_cos();
    let xip = taup.atan2(cos_l);
    let etap = (sin_l / taup.hypot(cos_l)).asinh();

    let mut xi = xip;
    let mut eta = etap;
    for (j, a) in k.alpha.iter().enumerate() {
        let m = 2.0 * (j + 1) as f64;
        xi += a * (m * xip).sin() * (m * etap).cosh();
        eta += a * (m * xip).cos() * (m * etap).sinh();
    }

    let easting = FALSE_EASTING + k.k0_a * eta;
    let mut northing = k.k0_a * xi;
    if zone.hemisphere == Hemisphere::S {
        northing += FALSE_NORTHING_SOUTH;
    }
    Ok(UtmPoint {
        easting,
        northing,
        zone,
    })
}

pub fn utm_to_wgs84(p: UtmPoint) -> Result<GeoPoint, GeodesyError> {
    if !(1..=60).contains(&p.zone.number) {
        return Err(GeodesyError::InvalidZone(p.zone.number));
    }
    if !(p.easting > 100_000.0 && p.easting < 900_000.0) {
        return Err(GeodesyError::EastingOutOfRange(p.easting));
    }
    if !(p.northing >= 0.0 && p.northing < 10_000_000.0) {
        return Err(GeodesyError::NorthingOutOfRange(p.northing));
    }
    let k = kruger();
    let y = match p.zone.hemisphere {
        Hemisphere::N => p.northing,
        Hemisphere::S => p.northing - FALSE_NORTHING_SOUTH,
    };
    let xi = y / k.k0_a;
    let eta = (p.easting - FALSE_EASTING) / k.k0_a;

    let mut xip = xi;
    let mut etap = eta;
    for (j, b) in k.beta.iter().enumerate() {
        let m = 2.0 * (j + 1) as f64;
        xip -= b * (m * xi).sin() * (m * eta).cosh();
        etap -= b * (m * xi).cos() * (m * eta).sinh();
    }

    let (sin_xip, cos_xip) = xip.sin_cos();
    let sinh_etap = etap.sinh();
    let taup = sin_xip / sinh_etap.hypot(cos_xip);
    let lam = sinh_etap.atan2(cos_xip);

    // Newton iteration for τ given τ'
    let e2m = 1.0 - k.e * k.e;
    let mut tau = taup;
    for _ in 0..10 {
        let taupa = conformal_tan(tau, k.e);
        let dtau =
            (taup - taupa) * (1.0 + e2m * tau * tau) / (e2m * tau.hypot(1.0) * taupa.hypot(1.0));
        tau += dtau;
        if dtau.abs() <= 1e-15 * tau.abs().max(1.0) {
            break;
        }
    }

    Ok(GeoPoint {
        latitude: tau.atan().to_degrees(),
        longitude: wrap_longitude(lam.to_degrees() + central_meridian(p.zone.number)),
    })
}

/// Compass heading (0 = north, clockwise) of the antenna baseline vector.
pub fn heading_from_baseline(east: f64, north: f64) -> Result<f64, GeodesyError> {
    if east == 0.0 && north == 0.0 || !east.is_finite() || !north.is_finite() {
        return Err(GeodesyError::DegenerateBaseline);
    }
    let h = normalize_compass(east.atan2(north));
    debug_assert!((0.0..TAU).contains(&h));
    Ok(h)
}
