//! On-vehicle side of the summon pipeline: the HTTP service, the
//! point-and-go translation node and the telemetry feed.
//!
//! HTTP requests never touch the bus directly. The service validates them and
//! sends a [`Command`] down a channel; the launcher drains that channel at the
//! next tick boundary and publishes from there, so requests land at
//! well-defined simulation times.

mod http;
mod point_and_go;
mod service;
mod telemetry;

pub use http::HttpServer;
pub use point_and_go::{translate, PointAndGoNode};
pub use service::{
    route, Command, HttpResponse, Reply, Route, SimClock, SummonRequest, SummonService,
};
pub use telemetry::{TelemetryCollector, TelemetryFrame, VehicleFix};
