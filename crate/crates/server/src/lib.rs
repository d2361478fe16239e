//! HTTP surface of the engine: a REST chat webhook, a stateless parse
//! endpoint, a training trigger and a status probe.
//!
//! The active engine sits behind a lock as an `Arc`. Every request clones
//! the `Arc` once and runs to completion on that model, so a retrain swaps
//! models atomically without interrupting requests in flight.

use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dialog_engine::dialog::{DialogTracker, PolicySource};
use dialog_engine::engine::{load_config, train};
use dialog_engine::knowledge_graph::{GraphStore, Triple};
use dialog_engine::nlu::ParseResult;
use dialog_engine::training_data::package_model;
use dialog_engine::{Engine, EngineError, TrainingData};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::CorsLayer;

pub const DEFAULT_PORT: u16 = 5005;
pub const PORT_ENV: &str = "DIALOG_ENGINE_PORT";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Serve(#[source] std::io::Error),
    #[error("tracker snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },
}

type Tracker = Arc<tokio::sync::Mutex<DialogTracker>>;

/// Shared server state.
pub struct AppState {
    engine: RwLock<Option<Arc<Engine>>>,
    kg: Arc<GraphStore>,
    trackers: Mutex<HashMap<String, Tracker>>,
    // Serializes retraining; readers never wait on it.
    training: tokio::sync::Mutex<()>,
    started: Instant,
}

impl AppState {
    /// `kg` is kept across retrains. When an engine is given, its graph
    /// takes precedence.
    pub fn new(engine: Option<Engine>, kg: Option<Arc<GraphStore>>) -> Self {
        let kg = match &engine {
            Some(e) => e.kg.clone(),
            None => kg.unwrap_or_default(),
        };
        Self {
            engine: RwLock::new(engine.map(Arc::new)),
            kg,
            trackers: Mutex::new(HashMap::new()),
            training: tokio::sync::Mutex::new(()),
            started: Instant::now(),
        }
    }

    pub fn engine(&self) -> Option<Arc<Engine>> {
        self.engine.read().expect("engine lock poisoned").clone()
    }

    pub fn swap_engine(&self, engine: Engine) {
        *self.engine.write().expect("engine lock poisoned") = Some(Arc::new(engine));
    }

    pub fn knowledge_graph(&self) -> Arc<GraphStore> {
        self.kg.clone()
    }

    fn tracker(&self, sender: &str) -> Tracker {
        self.trackers
            .lock()
            .expect("tracker map poisoned")
            .entry(sender.to_string())
            .or_insert_with(|| Arc::new(tokio::sync::Mutex::new(DialogTracker::new(sender))))
            .clone()
    }

    /// Copies of all trackers, keyed by sender.
    pub async fn trackers(&self) -> BTreeMap<String, DialogTracker> {
        let handles: Vec<(String, Tracker)> = self
            .trackers
            .lock()
            .expect("tracker map poisoned")
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let mut out = BTreeMap::new();
        for (sender, t) in handles {
            out.insert(sender, t.lock().await.clone());
        }
        out
    }

    pub fn restore_trackers(&self, trackers: BTreeMap<String, DialogTracker>) {
        let mut map = self.trackers.lock().expect("tracker map poisoned");
        for (sender, t) in trackers {
            map.insert(sender, Arc::new(tokio::sync::Mutex::new(t)));
        }
    }

    pub async fn write_snapshot(&self, path: &Path) -> Result<(), ServerError> {
        let err = |message: String| ServerError::Snapshot {
            path: path.to_path_buf(),
            message,
        };
        let json = serde_json::to_string_pretty(&self.trackers().await).map_err(|e| err(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| err(e.to_string()))
    }

    pub fn read_snapshot(&self, path: &Path) -> Result<usize, ServerError> {
        let err = |message: String| ServerError::Snapshot {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let trackers: BTreeMap<String, DialogTracker> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let n = trackers.len();
        self.restore_trackers(trackers);
        Ok(n)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(default)]
    pub sender: Option<String>,
    #[serde(default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplyMeta {
    pub intent: String,
    /// NLU confidence of `intent`.
    pub confidence: f64,
    pub policy: PolicySource,
    pub policy_confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<Triple>,
    pub turn_index: usize,
    pub model_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub recipient_id: String,
    pub text: String,
    pub meta: ReplyMeta,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseRequest {
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainRequest {
    pub data_dir: PathBuf,
    pub config: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Where to write the archive, if anywhere.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusInfo {
    pub model_fingerprint: String,
    pub intent_count: usize,
    pub triple_count: usize,
    pub conversation_count: usize,
    pub uptime_seconds: u64,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
}

/// An error response with a JSON body.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: message.into(),
                path: None,
                line: None,
            },
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn no_model() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no model loaded")
    }

    fn training(err: &EngineError) -> Self {
        let path = match err {
            EngineError::Format { path, .. } | EngineError::Io { path, .. } | EngineError::Graph { path, .. } => {
                Some(path.display().to_string())
            }
            _ => None,
        };
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: ErrorBody {
                error: err.to_string(),
                path,
                line: err.line(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn required(field: &str, value: Option<String>) -> Result<String, ApiError> {
    match value {
        Some(v) if !v.trim().is_empty() => Ok(v),
        _ => Err(ApiError::bad_request(format!("missing or empty field {field:?}"))),
    }
}

async fn webhook(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<ChatRequest>, JsonRejection>,
) -> Result<Json<Vec<ChatResponse>>, ApiError> {
    let req = body(payload)?;
    let sender = required("sender", req.sender)?;
    let message = required("message", req.message)?;
    let tracker = state.tracker(&sender);
    // The per-sender lock is fair, so one sender's messages run in arrival
    // order. The engine is fetched after it, pinning this turn to one model.
    let mut tracker = tracker.lock().await;
    let engine = state.engine().ok_or_else(ApiError::no_model)?;
    let outcome = engine
        .handle_message(&mut tracker, &message)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let top = outcome.parse.top().cloned();
    let responses = outcome
        .replies
        .into_iter()
        .map(|r| ChatResponse {
            recipient_id: sender.clone(),
            text: r.text,
            meta: ReplyMeta {
                intent: top.as_ref().map(|t| t.name.clone()).unwrap_or_default(),
                confidence: top.as_ref().map_or(0.0, |t| t.confidence),
                policy: r.source,
                policy_confidence: r.confidence,
                triple: r.triple,
                turn_index: outcome.turn_index,
                model_fingerprint: engine.fingerprint.clone(),
            },
        })
        .collect();
    Ok(Json(responses))
}

async fn parse(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<ParseRequest>, JsonRejection>,
) -> Result<Json<ParseResult>, ApiError> {
    let text = required("text", body(payload)?.text)?;
    let engine = state.engine().ok_or_else(ApiError::no_model)?;
    Ok(Json(engine.parse(text.trim())))
}

async fn train_model(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<TrainRequest>, JsonRejection>,
) -> Result<Json<TrainResponse>, ApiError> {
    let req = body(payload)?;
    let _guard = state.training.lock().await;
    let kg = state.knowledge_graph();
    let result = tokio::task::spawn_blocking(move || -> Result<Engine, EngineError> {
        let config = load_config(&req.config)?;
        let data = TrainingData::load_dir(&req.data_dir)?;
        let artifacts = train(&config, &data, req.seed.unwrap_or(DEFAULT_SEED))?;
        if let Some(out) = &req.out {
            package_model(&artifacts, out)?;
        }
        Ok(Engine::from_artifacts(artifacts, Some(kg)))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let engine = result.map_err(|e| ApiError::training(&e))?;
    let fingerprint = engine.fingerprint.clone();
    state.swap_engine(engine);
    Ok(Json(TrainResponse { fingerprint }))
}

async fn status(State(state): State<Arc<AppState>>) -> Result<Json<StatusInfo>, ApiError> {
    let engine = state.engine().ok_or_else(ApiError::no_model)?;
    let conversation_count = state.trackers.lock().expect("tracker map poisoned").len();
    Ok(Json(StatusInfo {
        model_fingerprint: engine.fingerprint.clone(),
        intent_count: engine.artifacts.domain.intents.len(),
        triple_count: engine.kg.triple_count(),
        conversation_count,
        uptime_seconds: state.started.elapsed().as_secs(),
    }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/webhooks/rest/webhook", post(webhook))
        .route("/model/parse", post(parse))
        .route("/model/train", post(train_model))
        .route("/status", get(status))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until `shutdown` resolves, then writes the tracker snapshot if a
/// path is given.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    snapshot: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(ServerError::Serve)?;
    if let Some(path) = snapshot {
        state.write_snapshot(&path).await?;
    }
    Ok(())
}

pub async fn bind(port: u16) -> Result<tokio::net::TcpListener, ServerError> {
    let addr = format!("0.0.0.0:{port}");
    tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServerError::Bind { addr, source })
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn required_rejects_blank() {
        assert!(required("m", None).is_err());
        assert!(required("m", Some("  ".into())).is_err());
        assert_eq!(required("m", Some("salam".into())).unwrap(), "salam");
    }

    #[test]
    fn meta_serializes_policy_snake_case() {
        let meta = ReplyMeta {
            intent: "greet".into(),
            confidence: 0.9,
            policy: PolicySource::KnowledgeGraph,
            policy_confidence: 0.5,
            triple: None,
            turn_index: 0,
            model_fingerprint: "ab".into(),
        };
        let v = serde_json::to_value(&meta).unwrap();
        assert_eq!(v["policy"], "knowledge_graph");
        assert!(v.get("triple").is_none());
    }

    #[tokio::test]
    async fn snapshot_round_trip() {
        let state = AppState::new(None, None);
        let mut t = DialogTracker::new("u1");
        t.push_user("salam", ParseResult::from_intent("greet", "salam"))
            .unwrap();
        state.restore_trackers(BTreeMap::from([("u1".to_string(), t.clone())]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trackers.json");
        state.write_snapshot(&path).await.unwrap();
        let other = AppState::new(None, None);
        assert_eq!(other.read_snapshot(&path).unwrap(), 1);
        assert_eq!(other.trackers().await["u1"], t);
    }
}
