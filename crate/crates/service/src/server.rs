//! HTTP chat sessions over the full pipeline.
//!
//! `POST /sessions` opens a session, `POST /sessions/{id}/messages` runs one
//! turn, `GET /sessions/{id}` returns the state and transcript, `GET
//! /healthz` answers `ok`. Turns of one session run one at a time in
//! arrival order; sessions do not block each other.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hceds::act::{ActMap, DialogAct};
use hceds::agent::Session;
use hceds::eval::episode_seed;
use hceds::hcenlu::NluOutput;
use hceds::state::DialogState;
use hceds::DialogueSystem;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};

use crate::config::ServiceConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptTurn {
    pub turn: usize,
    pub user: String,
    pub acts: Vec<DialogAct>,
    pub action: ActMap,
    pub utterance: String,
    pub closed: bool,
    pub at_ms: u64,
}

#[derive(Debug)]
struct SessionEntry {
    session: Session,
    transcript: Vec<TranscriptTurn>,
    created_ms: u64,
    last_active: Instant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenResponse {
    pub id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageRequest {
    pub text: String,
    /// User acts to use instead of running the NLU.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acts: Option<Vec<DialogAct>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageResponse {
    pub turn: usize,
    pub utterance: String,
    pub action: ActMap,
    pub acts: Vec<DialogAct>,
    pub state: DialogState,
    pub closed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nlu: Option<NluOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub state: DialogState,
    pub transcript: Vec<TranscriptTurn>,
    pub closed: bool,
    pub created_ms: u64,
}

#[derive(Debug)]
pub enum ApiError {
    NotFound,
    BadRequest(String),
    Conflict(String),
    Unavailable(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, msg) = match self {
            ApiError::NotFound => (StatusCode::NOT_FOUND, "no such session".to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Unavailable(m) => (StatusCode::SERVICE_UNAVAILABLE, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (code, Json(json!({ "error": msg }))).into_response()
    }
}

pub struct AppState {
    system: Arc<DialogueSystem>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionEntry>>>>,
    ttl: Duration,
    max_turns: usize,
    seed: u64,
    opened: AtomicU64,
    persist_dir: Option<PathBuf>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// 128 random bits from the OS, as hex.
fn new_id() -> String {
    let mut b = [0u8; 16];
    rand::rngs::OsRng.fill_bytes(&mut b);
    hex::encode(b)
}

impl AppState {
    pub fn new(system: DialogueSystem, cfg: &ServiceConfig) -> Self {
        AppState {
            system: Arc::new(system),
            sessions: RwLock::new(HashMap::new()),
            ttl: Duration::from_secs(cfg.session_ttl_secs),
            max_turns: cfg.max_turns,
            seed: cfg.seed,
            opened: AtomicU64::new(0),
            persist_dir: cfg.persist_dir.clone(),
        }
    }

    pub fn with_ttl(mut self, ttl: Duration) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn system(&self) -> &DialogueSystem {
        &self.system
    }

    /// Session `k` of this process draws from `episode_seed(seed, k)`, so a
    /// replayed script gets the same replies.
    pub async fn open(&self) -> String {
        let k = self.opened.fetch_add(1, Ordering::SeqCst);
        let id = new_id();
        let entry = SessionEntry {
            session: self.system.session(episode_seed(self.seed, k as usize)),
            transcript: Vec::new(),
            created_ms: now_ms(),
            last_active: Instant::now(),
        };
        self.sessions.write().await.insert(id.clone(), Arc::new(Mutex::new(entry)));
        self.persist(&id, &json!({ "event": "open", "at_ms": now_ms() }));
        id
    }

    async fn entry(&self, id: &str) -> Result<Arc<Mutex<SessionEntry>>, ApiError> {
        self.sessions.read().await.get(id).cloned().ok_or(ApiError::NotFound)
    }

    fn expired(&self, e: &SessionEntry) -> bool {
        e.last_active.elapsed() > self.ttl
    }

    pub async fn post(&self, id: &str, req: MessageRequest) -> Result<MessageResponse, ApiError> {
        if req.text.trim().is_empty() {
            return Err(ApiError::BadRequest("empty utterance".into()));
        }
        let entry = self.entry(id).await?;
        let mut guard = entry.lock_owned().await;
        if self.expired(&guard) {
            drop(guard);
            self.sessions.write().await.remove(id);
            return Err(ApiError::NotFound);
        }
        if guard.session.closed {
            return Err(ApiError::Conflict("session is closed".into()));
        }
        if req.acts.is_none() && self.system.nlu.is_none() {
            return Err(ApiError::Unavailable("no NLU model loaded; send acts".into()));
        }
        let system = self.system.clone();
        let max_turns = self.max_turns;
        let (resp, turn) = tokio::task::spawn_blocking(move || {
            let e = &mut *guard;
            let r = match req.acts {
                Some(acts) => system.respond_acts(&mut e.session, &acts, &req.text),
                None => system.respond_text(&mut e.session, &req.text).map_err(|err| ApiError::BadRequest(err.to_string()))?,
            };
            if e.session.turns >= max_turns {
                e.session.closed = true;
            }
            e.last_active = Instant::now();
            let turn = TranscriptTurn {
                turn: e.transcript.len(),
                user: req.text,
                acts: r.acts.clone(),
                action: r.action.clone(),
                utterance: r.utterance.clone(),
                closed: e.session.closed,
                at_ms: now_ms(),
            };
            e.transcript.push(turn.clone());
            let resp = MessageResponse {
                turn: turn.turn,
                utterance: r.utterance,
                action: r.action,
                acts: r.acts,
                state: e.session.state.clone(),
                closed: e.session.closed,
                nlu: r.nlu,
            };
            Ok::<_, ApiError>((resp, turn))
        })
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
        self.persist(id, &json!({ "event": "turn", "turn": turn }));
        Ok(resp)
    }

    pub async fn snapshot(&self, id: &str) -> Result<Snapshot, ApiError> {
        let entry = self.entry(id).await?;
        let e = entry.lock().await;
        if self.expired(&e) {
            drop(e);
            self.sessions.write().await.remove(id);
            return Err(ApiError::NotFound);
        }
        Ok(Snapshot {
            id: id.to_string(),
            state: e.session.state.clone(),
            transcript: e.transcript.clone(),
            closed: e.session.closed,
            created_ms: e.created_ms,
        })
    }

    /// Drops idle sessions; returns how many went.
    pub async fn sweep(&self) -> usize {
        let mut map = self.sessions.write().await;
        let before = map.len();
        let mut keep = HashMap::with_capacity(before);
        for (id, e) in map.drain() {
            // a session busy with a turn is in use, not idle
            let idle = e.try_lock().map(|g| self.expired(&g)).unwrap_or(false);
            if !idle {
                keep.insert(id, e);
            }
        }
        *map = keep;
        before - map.len()
    }

    pub async fn len(&self) -> usize {
        self.sessions.read().await.len()
    }

    pub async fn is_empty(&self) -> bool {
        self.len().await == 0
    }

    /// Appends one JSON line to the session's transcript file. Failures are
    /// logged; the turn itself has already happened.
    fn persist(&self, id: &str, record: &serde_json::Value) {
        let Some(dir) = &self.persist_dir else { return };
        let res = std::fs::create_dir_all(dir).and_then(|_| {
            let mut f = OpenOptions::new().create(true).append(true).open(dir.join(format!("{id}.jsonl")))?;
            writeln!(f, "{record}")
        });
        if let Err(e) = res {
            log::error!("persisting session {id}: {e}");
        }
    }
}

async fn healthz() -> &'static str {
    "ok"
}

async fn open_session(State(app): State<Arc<AppState>>) -> (StatusCode, Json<OpenResponse>) {
    (StatusCode::CREATED, Json(OpenResponse { id: app.open().await }))
}

async fn post_message(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<MessageRequest>,
) -> Result<Json<MessageResponse>, ApiError> {
    app.post(&id, req).await.map(Json)
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Snapshot>, ApiError> {
    app.snapshot(&id).await.map(Json)
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .with_state(app)
}

/// Binds and serves until ctrl-c, sweeping idle sessions in the background.
pub async fn serve(system: DialogueSystem, cfg: &ServiceConfig) -> anyhow::Result<()> {
    let app = Arc::new(AppState::new(system, cfg));
    let sweeper = app.clone();
    let every = Duration::from_secs((cfg.session_ttl_secs / 4).clamp(1, 60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let n = sweeper.sweep().await;
            if n > 0 {
                log::info!("expired {n} sessions");
            }
        }
    });
    let listener = tokio::net::TcpListener::bind((cfg.host.as_str(), cfg.port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
