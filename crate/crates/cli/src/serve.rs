//! HTTP and WebSocket session service.
//!
//! `POST /sessions` creates a session, `POST /sessions/{id}/message` runs one
//! planner round, `GET /sessions/{id}` returns a snapshot and
//! `/sessions/{id}/events` streams every event as a JSON frame, starting with
//! the backlog.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use planner_core::backend::OracleLexicon;
use planner_core::orchestrator::{SessionSnapshot, StepError};
use planner_core::{
    build_backend, resolve_world, BackendConfig, Limits, PlanBackend, Session, SessionConfig, SessionEvent,
    VisibilityPolicy,
};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::broadcast;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    /// Bundled world name or path; defaults to `apartment`.
    pub world: Option<String>,
    pub backend: Option<BackendConfig>,
    pub policy: Option<VisibilityPolicy>,
    pub limits: Option<Limits>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageBody {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub snapshot: SessionSnapshot,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepReply {
    pub events: Vec<SessionEvent>,
    pub snapshot: SessionSnapshot,
}

/// Error body for HTTP responses and WebSocket error frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFrame {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    frame: ErrorFrame,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            frame: ErrorFrame {
                error: ErrorDetail {
                    code: code.into(),
                    message: message.into(),
                },
            },
        }
    }

    fn unknown(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    fn malformed(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_message", e.to_string())
    }
}

impl From<StepError> for ApiError {
    fn from(e: StepError) -> Self {
        match e {
            StepError::NotAccepting(_) => Self::new(StatusCode::CONFLICT, "not_accepting", e.to_string()),
            StepError::EmptyInput => Self::new(StatusCode::BAD_REQUEST, "empty_input", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.frame)).into_response()
    }
}

struct Live {
    session: Session,
    backend: Box<dyn PlanBackend>,
}

struct Entry {
    live: Mutex<Live>,
    events: broadcast::Sender<SessionEvent>,
}

impl Entry {
    /// Runs a round; events are broadcast while the lock is held so
    /// subscribers see them in session order.
    fn step(&self, text: &str) -> Result<StepReply, StepError> {
        let mut guard = self.live.lock().expect("session lock");
        let Live { session, backend } = &mut *guard;
        let events = session.step(text, backend.as_ref())?;
        for ev in &events {
            let _ = self.events.send(ev.clone());
        }
        Ok(StepReply {
            events,
            snapshot: session.snapshot(),
        })
    }

    fn snapshot(&self) -> SessionSnapshot {
        self.live.lock().expect("session lock").session.snapshot()
    }
}

pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    next_id: AtomicU64,
    default_backend: BackendConfig,
}

impl AppState {
    pub fn new(default_backend: BackendConfig) -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            default_backend,
        }
    }

    fn get(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.sessions
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown(id))
    }

    fn create(&self, req: CreateSession) -> Result<Created, ApiError> {
        let invalid = |e: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", e);
        let world_name = req.world.unwrap_or_else(|| "apartment".into());
        let world = resolve_world(&world_name).map_err(|e| invalid(e.to_string()))?;
        let backend_config = req.backend.unwrap_or_else(|| self.default_backend.clone());
        let backend = build_backend(&backend_config, &OracleLexicon::for_world(world.state()))
            .map_err(|e| invalid(e.to_string()))?;
        let config = SessionConfig {
            policy: req.policy.unwrap_or_default(),
            limits: req.limits.unwrap_or_default(),
            ..SessionConfig::default()
        };
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let session = Session::new(id.clone(), world, config).map_err(|e| invalid(e.to_string()))?;
        let snapshot = session.snapshot();
        let (tx, _) = broadcast::channel(1024);
        let entry = Arc::new(Entry {
            live: Mutex::new(Live { session, backend }),
            events: tx,
        });
        self.sessions.write().expect("registry lock").insert(id.clone(), entry);
        Ok(Created { id, snapshot })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/message", post(post_message))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

/// Serve until the listener fails.
pub async fn serve(listener: TcpListener, default_backend: BackendConfig) -> std::io::Result<()> {
    axum::serve(listener, router(Arc::new(AppState::new(default_backend)))).await
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        serde_json::from_slice(&body).map_err(ApiError::malformed)?
    };
    let created = tokio::task::spawn_blocking(move || app.create(req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionSnapshot>, ApiError> {
    Ok(Json(app.get(&id)?.snapshot()))
}

async fn run_step(entry: Arc<Entry>, text: String) -> Result<StepReply, ApiError> {
    tokio::task::spawn_blocking(move || entry.step(&text))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn post_message(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<StepReply>, ApiError> {
    let entry = app.get(&id)?;
    let msg: MessageBody = serde_json::from_slice(&body).map_err(ApiError::malformed)?;
    Ok(Json(run_step(entry, msg.text).await?))
}

async fn events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let entry = app.get(&id)?;
    Ok(ws.on_upgrade(move |socket| stream_events(socket, entry)))
}

fn frame<T: Serialize>(value: &T) -> Message {
    Message::Text(serde_json::to_string(value).expect("frame serializes").into())
}

async fn stream_events(mut socket: WebSocket, entry: Arc<Entry>) {
    let (backlog, mut rx) = {
        let guard = entry.live.lock().expect("session lock");
        (guard.session.events().to_vec(), entry.events.subscribe())
    };
    for ev in &backlog {
        if socket.send(frame(ev)).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            ev = rx.recv() => match ev {
                Ok(ev) => {
                    if socket.send(frame(&ev)).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    let err = ApiError::new(StatusCode::OK, "lagged", format!("{n} events dropped; refetch the snapshot"));
                    if socket.send(frame(&err.frame)).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let reply = match serde_json::from_str::<MessageBody>(text.as_str()) {
                        Ok(msg) => run_step(entry.clone(), msg.text).await.err(),
                        Err(e) => Some(ApiError::malformed(e)),
                    };
                    if let Some(err) = reply {
                        if socket.send(frame(&err.frame)).await.is_err() {
                            return;
                        }
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let err = ApiError::malformed("binary frames are not supported");
                    if socket.send(frame(&err.frame)).await.is_err() {
                        return;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
