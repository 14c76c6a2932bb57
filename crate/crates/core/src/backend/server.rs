//! HTTP host for [`MockBackend`], the server side of the wire protocol.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tokio::sync::oneshot;

use super::{Backend, EmbedRequest, ErrorBody, MockBackend, ScoreRequest};
use crate::error::{Error, Result};

pub fn router(backend: Arc<MockBackend>) -> Router {
    Router::new()
        .route("/v1/score", post(score))
        .route("/v1/embed", post(embed))
        .with_state(backend)
}

fn bad_request(message: impl Into<String>) -> Response {
    (StatusCode::BAD_REQUEST, Json(ErrorBody { error: message.into() })).into_response()
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| bad_request(format!("invalid request body: {e}")))
}

async fn score(State(backend): State<Arc<MockBackend>>, body: Bytes) -> Response {
    let req: ScoreRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match backend.score(&req) {
        Ok(r) => Json(r).into_response(),
        Err(e) => bad_request(e.to_string()),
    }
}

async fn embed(State(backend): State<Arc<MockBackend>>, body: Bytes) -> Response {
    let req: EmbedRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match backend.embed(&req.texts) {
        Ok(r) => Json(r).into_response(),
        Err(e) => bad_request(e.to_string()),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("<tokio runtime>", e))
}

/// Serves until the process is terminated.
pub fn serve(addr: SocketAddr, backend: MockBackend) -> Result<()> {
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(addr.to_string(), e))?;
        axum::serve(listener, router(Arc::new(backend)))
            .await
            .map_err(|e| Error::io(addr.to_string(), e))
    })
}

/// A server running on a background thread; stopped on drop.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` (port 0 picks a free port) and serves on a background thread.
pub fn spawn(addr: SocketAddr, backend: MockBackend) -> Result<ServerHandle> {
    let rt = runtime()?;
    let listener = rt
        .block_on(tokio::net::TcpListener::bind(addr))
        .map_err(|e| Error::io(addr.to_string(), e))?;
    let local = listener
        .local_addr()
        .map_err(|e| Error::io(addr.to_string(), e))?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(Arc::new(backend));
    let thread = std::thread::spawn(move || {
        rt.block_on(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(ServerHandle {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
