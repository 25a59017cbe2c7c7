use std::convert::Infallible;
use std::io;
use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{ConnectInfo, State};
use axum::http::{header, HeaderMap, Method, StatusCode, Uri};
use axum::response::Response;
use axum::Router;
use tokio::sync::{broadcast, oneshot};

use super::service::{Reply, SummonService};

#[derive(Clone)]
struct AppState {
    service: SummonService,
    frames: broadcast::Sender<Arc<str>>,
}

/// The summon HTTP endpoint, served from a background thread with its own
/// runtime. Dropping the handle stops it.
pub struct HttpServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl HttpServer {
    /// Bind synchronously, so a busy port is reported here, then serve.
    /// `frames` carries serialized telemetry frames, one per message.
    pub fn start(
        addr: &str,
        service: SummonService,
        frames: broadcast::Sender<Arc<str>>,
    ) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let local = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .thread_name("vss-http")
            .enable_all()
            .build()?;
        let state = AppState { service, frames };
        let thread = std::thread::Builder::new()
            .name("vss-http-main".into())
            .spawn(move || {
                runtime.block_on(async move {
                    let listener = match tokio::net::TcpListener::from_std(listener) {
                        Ok(l) => l,
                        Err(e) => {
                            tracing::error!(%e, "cannot adopt listener");
                            return;
                        }
                    };
                    let app = Router::new().fallback(dispatch).with_state(state);
                    let serve = axum::serve(
                        listener,
                        app.into_make_service_with_connect_info::<SocketAddr>(),
                    );
                    tokio::select! {
                        r = serve => if let Err(e) = r { tracing::error!(%e, "http server failed") },
                        _ = rx => {}
                    }
                });
                runtime.shutdown_timeout(Duration::from_millis(200));
            })?;
        tracing::info!(%local, "summon service listening");
        Ok(Self {
            addr: local,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

async fn dispatch(
    State(state): State<AppState>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let client = headers
        .get("x-client-id")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
        .unwrap_or_else(|| peer.to_string());
    match state
        .service
        .handle(method.as_str(), uri.path(), &body, &client)
    {
        Reply::Response(r) => {
            let mut b = Response::builder()
                .status(StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR))
                .header(header::CONTENT_TYPE, "application/json");
            if let Some(allow) = r.allow {
                b = b.header(header::ALLOW, allow);
            }
            b.body(Body::from(r.body))
                .expect("static headers are valid")
        }
        Reply::Telemetry => {
            let rx = state.frames.subscribe();
            let stream = futures::stream::unfold(rx, |mut rx| async move {
                loop {
                    match rx.recv().await {
                        Ok(frame) => {
                            let line = Bytes::from(format!("{frame}\n"));
                            return Some((Ok::<_, Infallible>(line), rx));
                        }
                        Err(broadcast::error::RecvError::Lagged(n)) => {
                            tracing::warn!(skipped = n, "telemetry client lagging");
                        }
                        Err(broadcast::error::RecvError::Closed) => return None,
                    }
                }
            });
            Response::builder()
                .status(StatusCode::OK)
                .header(header::CONTENT_TYPE, "application/x-ndjson")
                .header(header::CACHE_CONTROL, "no-cache")
                .body(Body::from_stream(stream))
                .expect("static headers are valid")
        }
    }
}
