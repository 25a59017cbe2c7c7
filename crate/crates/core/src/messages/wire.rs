//! JSON summon body shared with the phone / web client.
//!
//! The body is an object with `latitude` and `longitude` in degrees and an
//! optional `mobility_mode` string. Keys are emitted in that order and numbers
//! use the shortest representation that parses back to the same `f64`.

use std::fmt::Write as _;

use serde_json::Value;
use thiserror::Error;

use super::{PointAndGo, GO_TO_WAYPOINT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("body must be a JSON object")]
    NotAnObject,
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("`{0}` must be a number")]
    NotANumber(&'static str),
    #[error("`{key}` out of range: {value}")]
    OutOfRange { key: &'static str, value: f64 },
    #[error("`mobility_mode` must be a string")]
    MobilityModeNotAString,
    #[error("`mobility_mode` must not be empty")]
    EmptyMobilityMode,
}

/// A summon request body as it travels over HTTP.
#[derive(Debug, Clone, PartialEq)]
pub struct WireSummon {
    pub latitude: f64,
    pub longitude: f64,
    pub mobility_mode: Option<String>,
}

impl WireSummon {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        Self {
            latitude,
            longitude,
            mobility_mode: None,
        }
    }
}

impl From<&PointAndGo> for WireSummon {
    fn from(p: &PointAndGo) -> Self {
        // The default mode is implied by its absence on the wire.
        let mobility_mode = (p.mobility_mode != GO_TO_WAYPOINT).then(|| p.mobility_mode.clone());
        Self {
            latitude: p.latitude,
            longitude: p.longitude,
            mobility_mode,
        }
    }
}

pub(crate) fn check_lat_lon(latitude: f64, longitude: f64) -> Result<(), WireError> {
    if !latitude.is_finite() || latitude.abs() > 90.0 {
        return Err(WireError::OutOfRange {
            key: "latitude",
            value: latitude,
        });
    }
    if !longitude.is_finite() || longitude.abs() > 180.0 {
        return Err(WireError::OutOfRange {
            key: "longitude",
            value: longitude,
        });
    }
    Ok(())
}

/// Shortest round-trip decimal for a finite `f64`, without exponent.
pub fn format_number(value: f64) -> String {
    if value == 0.0 {
        // folds -0.0 as well
        return "0".to_string();
    }
    format!("{value}")
}

fn push_json_string(out: &mut String, s: &str) {
    // serde_json escaping is exact JSON; reuse it for the one string field
    out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"));
}

pub fn encode_wire(msg: &WireSummon) -> String {
    let mut out = String::with_capacity(64);
    let _ = write!(
        out,
        "{{\"latitude\":{},\"longitude\":{}",
        format_number(msg.latitude),
        format_number(msg.longitude)
    );
    if let Some(mode) = &msg.mobility_mode {
        out.push_str(",\"mobility_mode\":");
        push_json_string(&mut out, mode);
    }
    out.push('}');
    out
}

fn number_field(obj: &serde_json::Map<String, Value>, key: &'static str) -> Result<f64, WireError> {
    match obj.get(key) {
        None => Err(WireError::MissingKey(key)),
        Some(v) => v.as_f64().ok_or(WireError::NotANumber(key)),
    }
}

pub fn decode_wire(text: &str) -> Result<PointAndGo, WireError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| WireError::Malformed(e.to_string()))?;
    let obj = value.as_object().ok_or(WireError::NotAnObject)?;
    let latitude = number_field(obj, "latitude")?;
    let longitude = number_field(obj, "longitude")?;
    check_lat_lon(latitude, longitude)?;
    let mobility_mode = match obj.get("mobility_mode") {
        None => GO_TO_WAYPOINT.to_string(),
        Some(Value::String(s)) if s.is_empty() => return Err(WireError::EmptyMobilityMode),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(WireError::MobilityModeNotAString),
    };
    Ok(PointAndGo {
        latitude,
        longitude,
        mobility_mode,
    })
}
