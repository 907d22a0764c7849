mod common;

use std::collections::BTreeSet;

use axum::http::StatusCode;
use serde_json::json;

use common::*;
use stforge_core::assets::CANONICAL_EXAMPLE;
use stforge_core::backends::{bundled_stub_configs, GeneratorConfig, StubScript};
use stforge_core::validator::{inject_source, Category, DialectProfile};

#[tokio::test]
async fn compile_endpoint_statuses() {
    let h = harness(bundled_stub_configs());
    let (status, v) = send_json(&h.app, "POST", "/compile", &json!({"source": CANONICAL_EXAMPLE})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["report"]["status"], "Success");
    assert_eq!(v["schema_version"], 1);

    let bad = inject_source(
        CANONICAL_EXAMPLE,
        &[Category::TypeMismatch],
        &DialectProfile::default_profile(),
    )
    .unwrap();
    let (_, v) = send_json(&h.app, "POST", "/compile", &json!({"source": bad})).await;
    assert_eq!(v["report"]["status"], "Failed");
    assert_eq!(v["report"]["diagnostics"][0]["code"], "E003");

    let (status, _) = send(&h.app, "POST", "/compile", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = send_json(
        &h.app,
        "POST",
        "/compile",
        &json!({"source": "x", "profile_id": "nope"}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let huge = json!({"source": "A".repeat(2 << 20)}).to_string();
    let (status, _) = send(&h.app, "POST", "/compile", huge).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn compile_is_stateless_apart_from_timing() {
    let h = harness(bundled_stub_configs());
    let body = json!({"source": "PROGRAM Main VAR aa : INT; END_VAR aa := bb; END_PROGRAM"});
    let (_, mut a) = send_json(&h.app, "POST", "/compile", &body).await;
    let (_, mut b) = send_json(&h.app, "POST", "/compile", &body).await;
    a["report"]["elapsed_ms"] = json!(0);
    b["report"]["elapsed_ms"] = json!(0);
    assert_eq!(a, b);
}

#[tokio::test]
async fn compile_emits_label_manifest() {
    let h = harness(bundled_stub_configs());
    let src = "PROGRAM Main\nVAR\n    speed : INT;\n    running : BOOL;\nEND_VAR\nIF running THEN speed := 5; END_IF;\nEND_PROGRAM\n";
    let (status, v) = send_json(
        &h.app,
        "POST",
        "/compile",
        &json!({"source": src, "strict_labels": true, "emit_label_manifest": true}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["report"]["status"], "Success", "{v}");
    assert_eq!(v["label_manifest"]["labels"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn initial_turn_streams_three_paths() {
    let h = harness(bundled_stub_configs());
    let id = new_session(&h.app).await;
    let (status, events) = message(&h.app, &id, &json!({"text": "count parts on a conveyor"})).await;
    assert_eq!(status, StatusCode::OK);
    let delta_labels: BTreeSet<String> = events
        .iter()
        .filter(|e| e.name == "delta")
        .map(|e| e.data["config_label"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(delta_labels.len(), 3);
    assert!(events.iter().filter(|e| e.name == "compile").count() >= 3);
    assert_eq!(events.last().unwrap().name, "done");
    assert_eq!(
        events.iter().filter(|e| e.name == "done" || e.name == "error").count(),
        1
    );
    assert_eq!(events.last().unwrap().data["paths"].as_array().unwrap().len(), 3);

    // Per path, deltas come before compiles.
    for label in &delta_labels {
        let kinds: Vec<&str> = events
            .iter()
            .filter(|e| e.data["config_label"] == label.as_str())
            .map(|e| e.name.as_str())
            .collect();
        let first_compile = kinds.iter().position(|k| *k == "compile").unwrap_or(kinds.len());
        assert!(
            kinds[first_compile..].iter().all(|k| *k == "compile"),
            "{label}: {kinds:?}"
        );
    }

    let (status, v) = send_json(&h.app, "GET", &format!("/sessions/{id}"), &json!(null)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["session"]["turns"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn followup_streams_one_path() {
    let h = harness(bundled_stub_configs());
    let id = new_session(&h.app).await;
    message(&h.app, &id, &json!({"text": "start a motor with a delay"})).await;
    let (_, events) = message(
        &h.app,
        &id,
        &json!({"text": "now make it 10 seconds", "select_model": "stub-rag"}),
    )
    .await;
    let labels: BTreeSet<&str> = events
        .iter()
        .filter(|e| e.name == "delta" || e.name == "compile")
        .map(|e| e.data["config_label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, BTreeSet::from(["stub-rag"]));
    assert_eq!(events.last().unwrap().name, "done");

    let (status, _) = send_json(
        &h.app,
        "POST",
        &format!("/sessions/{id}/message"),
        &json!({"text": "x", "select_model": "ghost"}),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn draft_mode_sends_no_compile_events() {
    let h = harness(bundled_stub_configs());
    let (_, v) = send_json(
        &h.app,
        "POST",
        "/sessions",
        &json!({"settings": {"expansion": false, "draft_mode": true, "compile_enabled": true}}),
    )
    .await;
    let id = v["session_id"].as_str().unwrap();
    let (_, events) = message(&h.app, id, &json!({"text": "toggle a light"})).await;
    assert!(events.iter().all(|e| e.name != "compile"));
    assert_eq!(events.last().unwrap().name, "done");
}

#[tokio::test]
async fn backend_failure_is_reported_in_done() {
    let h = harness(vec![GeneratorConfig::stub(
        "down",
        StubScript::Fail {
            kind: stforge_core::backends::FailureKind::Transport,
        },
        false,
    )]);
    let id = new_session(&h.app).await;
    let (_, events) = message(&h.app, &id, &json!({"text": "anything"})).await;
    let done = events.last().unwrap();
    assert_eq!(done.name, "done");
    assert_eq!(done.data["paths"][0]["final_status"]["Failed"], "BackendError");
}

#[tokio::test]
async fn unknown_session_is_404() {
    let h = harness(bundled_stub_configs());
    let (status, _) = send_json(&h.app, "POST", "/sessions/deadbeef/message", &json!({"text": "hi"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send_json(&h.app, "GET", "/sessions/deadbeef", &json!(null)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn upload_and_health() {
    let h = harness(bundled_stub_configs());
    let (status, v) = send(
        &h.app,
        "POST",
        "/upload?filename=notes.txt",
        "Conveyor C3 uses a light barrier at the infeed.",
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&v));
    let (status, _) = send(&h.app, "POST", "/upload?filename=blob.bin", vec![0u8, 1, 2, 3]).await;
    assert_eq!(status, StatusCode::UNSUPPORTED_MEDIA_TYPE);

    let (status, v) = send_json(&h.app, "GET", "/health", &json!(null)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["segments"]["Auxiliary"], 1);
    assert_eq!(v["segments"]["FunctionBlocks"], 25);
    assert_eq!(v["profile_id"], DialectProfile::default_profile().id);

    let (_, v) = send_json(&h.app, "GET", "/profiles", &json!(null)).await;
    assert_eq!(v["profiles"][0]["active"], true);
}
