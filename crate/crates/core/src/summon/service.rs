use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};

use serde::Deserialize;
use serde_json::json;

use crate::messages::{decode_wire, GO_TO_WAYPOINT};

/// Simulation time shared with the HTTP threads, for stamping requests.
#[derive(Debug, Clone, Default)]
pub struct SimClock(Arc<AtomicU64>);

impl SimClock {
    pub fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Acquire))
    }

    pub fn set(&self, t: f64) {
        self.0.store(t.to_bits(), Ordering::Release);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummonRequest {
    pub latitude: f64,
    pub longitude: f64,
    /// Simulation time when the request was accepted.
    pub received_at: f64,
    pub client_id: String,
}

/// What the service asks the launcher to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Summon(SummonRequest),
    Estop(bool),
    Reset,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
    /// `Allow` header value for 405 responses.
    pub allow: Option<&'static str>,
}

impl HttpResponse {
    fn ok() -> Self {
        Self {
            status: 200,
            body: json!({"status": "ok"}).to_string(),
            allow: None,
        }
    }

    fn error(status: u16, detail: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({"status": "error", "detail": detail.into()}).to_string(),
            allow: None,
        }
    }
}

/// A request that passed validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Route {
    Summon { latitude: f64, longitude: f64 },
    Estop(bool),
    Reset,
    Telemetry,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EstopBody {
    on: bool,
}

const ROUTES: &[(&str, &str)] = &[
    ("/summon", "POST"),
    ("/estop", "POST"),
    ("/reset", "POST"),
    ("/telemetry", "GET"),
];

/// Path and method dispatch plus body validation, with no side effects.
pub fn route(method: &str, path: &str, body: &[u8]) -> Result<Route, HttpResponse> {
    let Some(&(_, allowed)) = ROUTES.iter().find(|(p, _)| *p == path) else {
        return Err(HttpResponse::error(404, format!("no route for {path}")));
    };
    if method != allowed {
        return Err(HttpResponse {
            allow: Some(allowed),
            ..HttpResponse::error(405, format!("{path} accepts {allowed} only"))
        });
    }
    let text =
        || std::str::from_utf8(body).map_err(|_| HttpResponse::error(400, "body is not UTF-8"));
    match path {
        "/summon" => {
            let p = decode_wire(text()?).map_err(|e| HttpResponse::error(400, e.to_string()))?;
            if p.mobility_mode != GO_TO_WAYPOINT {
                return Err(HttpResponse::error(
                    400,
                    format!("unsupported mobility_mode `{}`", p.mobility_mode),
                ));
            }
            Ok(Route::Summon {
                latitude: p.latitude,
                longitude: p.longitude,
            })
        }
        "/estop" => {
            let b: EstopBody = serde_json::from_str(text()?)
                .map_err(|e| HttpResponse::error(400, e.to_string()))?;
            Ok(Route::Estop(b.on))
        }
        "/reset" => Ok(Route::Reset),
        _ => Ok(Route::Telemetry),
    }
}

/// Either a finished response or a request to open the telemetry stream.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Response(HttpResponse),
    Telemetry,
}

#[derive(Clone)]
pub struct SummonService {
    tx: mpsc::Sender<Command>,
    clock: SimClock,
}

impl SummonService {
    pub fn new(tx: mpsc::Sender<Command>, clock: SimClock) -> Self {
        Self { tx, clock }
    }

    pub fn handle(&self, method: &str, path: &str, body: &[u8], client_id: &str) -> Reply {
        let cmd = match route(method, path, body) {
            Err(resp) => {
                tracing::debug!(method, path, status = resp.status, "rejected request");
                return Reply::Response(resp);
            }
            Ok(Route::Telemetry) => return Reply::Telemetry,
            Ok(Route::Summon {
                latitude,
                longitude,
            }) => Command::Summon(SummonRequest {
                latitude,
                longitude,
                received_at: self.clock.get(),
                client_id: client_id.to_string(),
            }),
            Ok(Route::Estop(on)) => Command::Estop(on),
            Ok(Route::Reset) => Command::Reset,
        };
        tracing::info!(?cmd, "accepted");
        match self.tx.send(cmd) {
            Ok(()) => Reply::Response(HttpResponse::ok()),
            Err(_) => Reply::Response(HttpResponse::error(503, "vehicle is not running")),
        }
    }
}
