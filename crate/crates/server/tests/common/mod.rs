#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use stforge_core::backends::GeneratorConfig;
use stforge_core::knowledge::{seed_index, HashingEmbedder, KnowledgeIndex};
use stforge_core::orchestrator::{Orchestrator, SessionStore};
use stforge_core::validator::{DialectProfile, InternalCompiler};
use stforge_server::{router, AppState};

pub struct Harness {
    pub app: Router,
    pub state: AppState,
    _dir: tempfile::TempDir,
}

pub fn harness(configs: Vec<GeneratorConfig>) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let profile = DialectProfile::default_profile();
    let index = KnowledgeIndex::in_memory(Box::new(HashingEmbedder::default()));
    seed_index(&index).unwrap();
    let orch = Orchestrator::new(
        profile.clone(),
        Arc::new(InternalCompiler::new(profile)),
        Arc::new(index),
        configs,
    );
    let store = SessionStore::open(dir.path().join("sessions")).unwrap();
    let state = AppState::new(orch, store);
    Harness {
        app: router(state.clone()),
        state,
        _dir: dir,
    }
}

pub async fn send(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.into())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn send_json(app: &Router, method: &str, uri: &str, body: &Value) -> (StatusCode, Value) {
    let (status, bytes) = send(app, method, uri, body.to_string()).await;
    let v = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, v)
}

#[derive(Debug, Clone)]
pub struct SseEvent {
    pub name: String,
    pub data: Value,
}

/// Splits an event-stream body into named events, skipping comments.
pub fn parse_sse(body: &[u8]) -> Vec<SseEvent> {
    let text = String::from_utf8_lossy(body);
    let mut out = Vec::new();
    for block in text.split("\n\n") {
        let mut name = String::from("message");
        let mut data = String::new();
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                name = v.trim().to_string();
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push_str(v.strip_prefix(' ').unwrap_or(v));
            }
        }
        if !data.is_empty() {
            out.push(SseEvent {
                name,
                data: serde_json::from_str(&data).unwrap_or(Value::String(data)),
            });
        }
    }
    out
}

pub async fn new_session(app: &Router) -> String {
    let (status, v) = send_json(app, "POST", "/sessions", &serde_json::json!({})).await;
    assert_eq!(status, StatusCode::CREATED);
    v["session_id"].as_str().unwrap().to_string()
}

pub async fn message(app: &Router, id: &str, body: &Value) -> (StatusCode, Vec<SseEvent>) {
    let (status, bytes) = send(app, "POST", &format!("/sessions/{id}/message"), body.to_string()).await;
    (status, parse_sse(&bytes))
}
