//! HTTP front end.

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use vamp_core::codec::base64_decode;
use vamp_core::ledger::{EntryMode, LedgerError};
use vamp_core::manifest::ManifestId;

use crate::store::{load_or_create_log_key, PublishError, Registry, StoreError, TrustSource};
use crate::wire::{receipt_to_json, ErrorDoc, PublishRequest, RecordDoc, RecordList};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: String,
    pub data_dir: PathBuf,
    pub trust_dir: PathBuf,
    /// Defaults to `<data_dir>/log.key`.
    pub log_key: Option<PathBuf>,
    pub entry_mode: EntryMode,
}

impl ServerConfig {
    pub fn open_registry(&self) -> Result<Registry, StoreError> {
        let key_path = self
            .log_key
            .clone()
            .unwrap_or_else(|| self.data_dir.join("log.key"));
        let key = load_or_create_log_key(&key_path)?;
        Registry::open(
            &self.data_dir,
            TrustSource::Dir(self.trust_dir.clone()),
            key,
            self.entry_mode,
        )
    }
}

fn error(status: StatusCode, error: &str, message: impl ToString) -> Response {
    (
        status,
        Json(ErrorDoc {
            error: error.into(),
            message: message.to_string(),
        }),
    )
        .into_response()
}

fn canonical_json(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/v1/manifests", post(publish))
        .route("/v1/manifests/{id}", get(fetch))
        .route("/v1/objects/{object_id}/manifests", get(by_object))
        .route("/v1/content/{digest}/manifests", get(by_content))
        .route("/v1/log/head", get(head))
        .route("/v1/log/key", get(log_key))
        .route("/v1/log/proof", get(proof))
        .route("/v1/log/consistency", get(consistency))
        .with_state(registry)
}

async fn publish(State(reg): State<Arc<Registry>>, body: Bytes) -> Response {
    let req: PublishRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, "MalformedEnvelope", e),
    };
    let Some(bytes) = base64_decode(&req.envelope) else {
        return error(StatusCode::BAD_REQUEST, "MalformedEnvelope", "envelope is not valid Base64");
    };
    let outcome = tokio::task::spawn_blocking(move || reg.publish(&bytes)).await;
    match outcome {
        Ok(Ok((record, created))) => {
            let status = if created { StatusCode::CREATED } else { StatusCode::OK };
            tracing::info!(id = %record.manifest_id, seq = record.sequence, created, "publish");
            (status, Json(RecordDoc::from(&*record))).into_response()
        }
        Ok(Err(e @ PublishError::MalformedEnvelope(_))) => {
            error(StatusCode::BAD_REQUEST, "MalformedEnvelope", e)
        }
        Ok(Err(e @ PublishError::UntrustedSigner(_))) => {
            error(StatusCode::UNAUTHORIZED, "UntrustedSigner", e)
        }
        Ok(Err(e @ PublishError::ConflictingBytes(_))) => {
            error(StatusCode::CONFLICT, "ConflictingBytes", e)
        }
        Ok(Err(e @ PublishError::Storage(_))) => {
            tracing::error!(%e, "publish failed");
            error(StatusCode::INTERNAL_SERVER_ERROR, "Storage", e)
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e),
    }
}

async fn fetch(State(reg): State<Arc<Registry>>, Path(id): Path<String>) -> Response {
    let Ok(id) = id.parse::<ManifestId>() else {
        return error(StatusCode::NOT_FOUND, "NotFound", format!("no manifest {id}"));
    };
    match reg.view().get(&id) {
        Some(r) => Json(RecordDoc::from(&*r)).into_response(),
        None => error(StatusCode::NOT_FOUND, "NotFound", format!("no manifest {id}")),
    }
}

async fn by_object(State(reg): State<Arc<Registry>>, Path(object_id): Path<String>) -> Response {
    let records = reg.view().by_object(&object_id).iter().map(|r| RecordDoc::from(&**r)).collect();
    Json(RecordList { records }).into_response()
}

async fn by_content(State(reg): State<Arc<Registry>>, Path(digest): Path<String>) -> Response {
    let records = reg.view().by_content(&digest).iter().map(|r| RecordDoc::from(&**r)).collect();
    Json(RecordList { records }).into_response()
}

async fn head(State(reg): State<Arc<Registry>>) -> Response {
    canonical_json(reg.head().to_json_bytes())
}

async fn log_key(State(reg): State<Arc<Registry>>) -> Response {
    canonical_json(reg.log_key().to_json_bytes())
}

#[derive(Deserialize)]
struct ProofQuery {
    seq: u64,
    size: Option<u64>,
}

fn range_error(e: LedgerError) -> Response {
    match e {
        LedgerError::OutOfRange { .. } => error(StatusCode::RANGE_NOT_SATISFIABLE, "OutOfRange", e),
        other => error(StatusCode::INTERNAL_SERVER_ERROR, "Ledger", other),
    }
}

async fn proof(State(reg): State<Arc<Registry>>, Query(q): Query<ProofQuery>) -> Response {
    let size = q.size.unwrap_or_else(|| reg.head().tree_size);
    match reg.proof(q.seq, size) {
        Ok(r) => Json(receipt_to_json(&r)).into_response(),
        Err(e) => range_error(e),
    }
}

#[derive(Deserialize)]
struct ConsistencyQuery {
    old: u64,
    new: u64,
}

async fn consistency(
    State(reg): State<Arc<Registry>>,
    Query(q): Query<ConsistencyQuery>,
) -> Response {
    match reg.consistency(q.old, q.new) {
        Ok(proof) => {
            let list: Vec<String> = proof.iter().map(|d| d.to_string()).collect();
            Json(serde_json::json!({ "proof": list })).into_response()
        }
        Err(e) => range_error(e),
    }
}

pub async fn serve(
    listener: tokio::net::TcpListener,
    registry: Arc<Registry>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(registry))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own thread and runtime, for tests and tools
/// that are otherwise synchronous.
#[derive(Debug)]
pub struct BackgroundServer {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl BackgroundServer {
    pub fn start(config: &ServerConfig) -> Result<Self, StoreError> {
        let registry = Arc::new(config.open_registry()?);
        let listener = std::net::TcpListener::bind(&config.addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                serve(listener, registry, async {
                    let _ = rx.await;
                })
                .await
            })
        });
        Ok(BackgroundServer {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub fn stop(mut self) -> io::Result<()> {
        self.shutdown_now()
    }

    fn shutdown_now(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.shutdown_now();
    }
}
