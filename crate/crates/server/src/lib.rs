//! HTTP surface: compilation, chat sessions with streamed answers, uploads,
//! and health. Blocking pipeline work runs on the blocking thread pool.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::mpsc;

use stforge_core::dialect::LabelManifest;
use stforge_core::knowledge::{KnowledgeError, KnowledgeIndex, Segment};
use stforge_core::orchestrator::{
    EventSink, FinalStatus, Orchestrator, OrchestratorError, PathEvent, PathResult, SessionError, SessionSettings,
    SessionStore,
};
use stforge_core::validator::{
    CompileOptions, CompileReport, CompileStatus, CompilerAdapter, DialectProfile, InternalCompiler,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest accepted source text.
pub const MAX_SOURCE_BYTES: usize = 1 << 20;
const MAX_UPLOAD_BYTES: usize = 8 << 20;
/// Room for the JSON envelope around a maximal source.
const BODY_SLACK: usize = 64 << 10;

#[derive(Clone)]
pub struct AppState {
    pub orchestrator: Orchestrator,
    pub store: Arc<SessionStore>,
    pub profiles: Arc<BTreeMap<String, DialectProfile>>,
    /// Used for `/compile` when set; label manifests always come from the
    /// internal compiler.
    pub external_compiler: Option<Arc<dyn CompilerAdapter>>,
}

impl AppState {
    pub fn new(orchestrator: Orchestrator, store: SessionStore) -> Self {
        let mut profiles = BTreeMap::new();
        profiles.insert(orchestrator.profile.id.clone(), orchestrator.profile.clone());
        Self {
            orchestrator,
            store: Arc::new(store),
            profiles: Arc::new(profiles),
            external_compiler: None,
        }
    }

    pub fn with_profile(mut self, profile: DialectProfile) -> Self {
        Arc::make_mut(&mut self.profiles).insert(profile.id.clone(), profile);
        self
    }

    pub fn with_external_compiler(mut self, adapter: Arc<dyn CompilerAdapter>) -> Self {
        self.external_compiler = Some(adapter);
        self
    }

    fn index(&self) -> &KnowledgeIndex {
        &self.orchestrator.index
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route(
            "/compile",
            post(compile).layer(DefaultBodyLimit::max(MAX_SOURCE_BYTES + BODY_SLACK)),
        )
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/message", post(message))
        .route("/upload", post(upload).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES)))
        .route("/health", get(health))
        .route("/profiles", get(profiles))
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (
        status,
        Json(json!({"schema_version": SCHEMA_VERSION, "error": message.into()})),
    )
        .into_response()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileRequest {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub source: String,
    #[serde(default)]
    pub profile_id: Option<String>,
    #[serde(default)]
    pub strict_labels: Option<bool>,
    #[serde(default)]
    pub emit_label_manifest: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompileResponse {
    pub schema_version: u32,
    pub report: CompileReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_manifest: Option<LabelManifest>,
}

async fn compile(State(state): State<AppState>, body: Bytes) -> Response {
    let req: CompileRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed compile request: {e}")),
    };
    if req.source.len() > MAX_SOURCE_BYTES {
        return error(StatusCode::PAYLOAD_TOO_LARGE, "source exceeds 1 MiB");
    }
    if let Some(v) = req.schema_version {
        if v != SCHEMA_VERSION {
            return error(StatusCode::BAD_REQUEST, format!("unsupported schema_version {v}"));
        }
    }
    let profile_id = req
        .profile_id
        .clone()
        .unwrap_or_else(|| state.orchestrator.profile.id.clone());
    let Some(profile) = state.profiles.get(&profile_id).cloned() else {
        return error(StatusCode::BAD_REQUEST, format!("unknown profile `{profile_id}`"));
    };
    let external = state.external_compiler.clone();
    let joined = tokio::task::spawn_blocking(move || {
        let options = CompileOptions {
            strict_labels: req.strict_labels,
            ..CompileOptions::default()
        };
        let internal = InternalCompiler::new(match req.strict_labels {
            Some(s) => profile.with_strict_labels(s),
            None => profile,
        });
        if req.emit_label_manifest {
            internal.compile_with_manifest(&req.source, &options)
        } else if let Some(ext) = external {
            (ext.compile(&req.source, &options), None)
        } else {
            (internal.compile(&req.source, &options), None)
        }
    })
    .await;
    let (report, label_manifest) = match joined {
        Ok(r) => r,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, format!("compile task failed: {e}")),
    };
    let status = if report.status == CompileStatus::Timeout {
        StatusCode::GATEWAY_TIMEOUT
    } else {
        StatusCode::OK
    };
    let body = CompileResponse {
        schema_version: SCHEMA_VERSION,
        report,
        label_manifest,
    };
    (status, Json(body)).into_response()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    settings: Option<SessionSettings>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Response {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed session request: {e}")),
        }
    };
    match state.store.create(req.settings.unwrap_or_default()) {
        Ok(s) => (
            StatusCode::CREATED,
            Json(json!({"schema_version": SCHEMA_VERSION, "session_id": s.id, "session": s})),
        )
            .into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn session_error(e: SessionError) -> Response {
    match e {
        SessionError::NotFound(_) | SessionError::InvalidId(_) => error(StatusCode::NOT_FOUND, e.to_string()),
        SessionError::Busy(_) => error(StatusCode::CONFLICT, e.to_string()),
        SessionError::NoSuchTurn(_) => error(StatusCode::BAD_REQUEST, e.to_string()),
        other => error(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    }
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.store.load(&id) {
        Ok(s) => Json(json!({"schema_version": SCHEMA_VERSION, "session": s})).into_response(),
        Err(e) => session_error(e),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRequest {
    pub text: String,
    /// Picks the model for this and later follow-up turns.
    #[serde(default)]
    pub select_model: Option<String>,
    #[serde(default)]
    pub settings: Option<SessionSettings>,
}

/// Compact per-path result carried by the `done` event.
#[derive(Debug, Serialize, Deserialize)]
pub struct PathSummary {
    pub config_label: String,
    pub final_status: FinalStatus,
    pub attempts: usize,
    pub code: Option<String>,
    pub explanation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&PathResult> for PathSummary {
    fn from(r: &PathResult) -> Self {
        Self {
            config_label: r.config_label.clone(),
            final_status: r.final_status,
            attempts: r.reports.len(),
            code: r.output.code.clone(),
            explanation: r.output.explanation.clone(),
            error: r.error.clone(),
        }
    }
}

fn sse_event(name: &str, data: &Value) -> Event {
    Event::default().event(name).data(data.to_string())
}

async fn message(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    let req: MessageRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed message: {e}")),
    };
    if !state.store.exists(&id) {
        return error(StatusCode::NOT_FOUND, format!("unknown session `{id}`"));
    }
    if req.text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "message text must not be empty");
    }
    if let Some(label) = &req.select_model {
        if state.orchestrator.config(label).is_none() {
            return error(StatusCode::BAD_REQUEST, format!("unknown model label `{label}`"));
        }
    }
    Sse::new(chat_stream(state, id, req))
        .keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
        .into_response()
}

/// Runs one turn and yields its events. The stream always ends with exactly
/// one `done` or `error` event.
fn chat_stream(state: AppState, id: String, req: MessageRequest) -> impl Stream<Item = Result<Event, Infallible>> {
    let (tx, rx) = mpsc::unbounded_channel::<Event>();
    let forward = tx.clone();
    let sink: EventSink = Arc::new(move |e: PathEvent| {
        let ev = match &e {
            PathEvent::Delta { config_label, text } => {
                sse_event("delta", &json!({"config_label": config_label, "text": text}))
            }
            PathEvent::Compile { config_label, report } => {
                sse_event("compile", &json!({"config_label": config_label, "report": report}))
            }
            PathEvent::PathDone { .. } => return,
        };
        let _ = forward.send(ev);
    });
    tokio::spawn(async move {
        let session_id = id.clone();
        let joined = tokio::task::spawn_blocking(move || -> Result<Vec<PathResult>, OrchestratorError> {
            if let Some(s) = req.settings {
                state.store.update_settings(&id, s)?;
            }
            if let Some(label) = &req.select_model {
                state.store.select_model(&id, Some(label))?;
            }
            state.orchestrator.converse(&state.store, &id, &req.text, &sink)
        })
        .await;
        let last = match joined {
            Ok(Ok(results)) => {
                let paths: Vec<PathSummary> = results.iter().map(PathSummary::from).collect();
                sse_event("done", &json!({"session_id": session_id, "paths": paths}))
            }
            Ok(Err(e)) => sse_event("error", &json!({"session_id": session_id, "error": e.to_string()})),
            Err(e) => sse_event(
                "error",
                &json!({"session_id": session_id, "error": format!("turn aborted: {e}")}),
            ),
        };
        let _ = tx.send(last);
    });
    stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|ev| (Ok(ev), rx)) })
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    filename: String,
}

async fn upload(State(state): State<AppState>, Query(q): Query<UploadQuery>, body: Bytes) -> Response {
    let joined = tokio::task::spawn_blocking(move || {
        state
            .index()
            .ingest_upload(&q.filename, &body)
            .map(|ids| (q.filename, ids))
    })
    .await;
    match joined {
        Ok(Ok((filename, ids))) => Json(json!({
            "schema_version": SCHEMA_VERSION,
            "filename": filename,
            "chunks": ids.len(),
            "ids": ids,
        }))
        .into_response(),
        Ok(Err(e @ (KnowledgeError::BinaryContentRejected(_) | KnowledgeError::EncodingRejected(_)))) => {
            error(StatusCode::UNSUPPORTED_MEDIA_TYPE, e.to_string())
        }
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn health(State(state): State<AppState>) -> Response {
    let segments: BTreeMap<&str, usize> = Segment::ALL
        .iter()
        .map(|s| (s.name(), state.index().count(*s)))
        .collect();
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "profile_id": state.orchestrator.profile.id,
        "compiler_id": state.orchestrator.compiler.id(),
        "segments": segments,
        "models": state.orchestrator.configs.iter().map(|c| c.label.clone()).collect::<Vec<_>>(),
    }))
    .into_response()
}

async fn profiles(State(state): State<AppState>) -> Response {
    let list: Vec<Value> = state
        .profiles
        .values()
        .map(|p| {
            json!({
                "id": p.id,
                "active": p.id == state.orchestrator.profile.id,
                "strict_labels": p.strict_labels,
                "min_identifier_length": p.identifier_rules.min_length,
                "datatypes": p.allowed_datatypes,
            })
        })
        .collect();
    Json(json!({"schema_version": SCHEMA_VERSION, "profiles": list})).into_response()
}
