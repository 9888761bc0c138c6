use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use hceds::act::DialogAct;
use hceds::hcenlu::{examples_from_corpus, TrainConfig};
use hceds::state::init_state;
use hceds::toy::{generate_toy_corpus, toy_nlu_config, train_toy, ToyConfig};
use hceds::DialogueSystem;
use hceds_service::server::{MessageRequest, MessageResponse, OpenResponse, Snapshot};
use hceds_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

fn app_with(system: DialogueSystem, cfg: &ServiceConfig) -> (Arc<AppState>, Router) {
    let state = Arc::new(AppState::new(system, cfg));
    (state.clone(), router(state))
}

async fn open(app: &Router) -> String {
    let (s, v) = call(app, "POST", "/sessions", None).await;
    assert_eq!(s, StatusCode::CREATED);
    serde_json::from_value::<OpenResponse>(v).unwrap().id
}

fn acts_msg(text: &str, acts: &[DialogAct]) -> Value {
    serde_json::to_value(MessageRequest {
        text: text.into(),
        acts: Some(acts.to_vec()),
    })
    .unwrap()
}

#[tokio::test]
async fn session_lifecycle_with_acts() {
    let (_, app) = app_with(DialogueSystem::default(), &ServiceConfig::default());
    assert_eq!(call(&app, "GET", "/healthz", None).await, (StatusCode::OK, Value::String("ok".into())));
    let id = open(&app).await;
    let other = open(&app).await;
    assert_ne!(id, other);
    assert_eq!(id.len(), 32);

    let (s, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    let snap: Snapshot = serde_json::from_value(v).unwrap();
    assert_eq!(snap.state, init_state(&hceds::schema::Schema::builtin()));
    assert!(snap.transcript.is_empty());

    let msg = acts_msg("i am looking for a college", &[DialogAct::new("Attraction", "Inform", "Type", "college")]);
    let (s, v) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(msg)).await;
    assert_eq!(s, StatusCode::OK);
    let r: MessageResponse = serde_json::from_value(v).unwrap();
    assert!(r.action.get("Attraction-Recommend").is_some());
    assert_eq!(r.state.belief_state["attraction"].semi["type"], "college");

    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    let snap: Snapshot = serde_json::from_value(v).unwrap();
    assert_eq!(snap.state.belief_state["attraction"].semi["type"], "college");
    assert_eq!(snap.transcript.len(), 1);

    let bye = acts_msg("thanks bye", &[DialogAct::bare("general", "thank"), DialogAct::bare("general", "bye")]);
    let (_, v) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(bye.clone())).await;
    assert!(serde_json::from_value::<MessageResponse>(v).unwrap().closed);
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(bye)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(serde_json::from_value::<Snapshot>(v).unwrap().closed);
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let (_, app) = app_with(DialogueSystem::default(), &ServiceConfig::default());
    let id = open(&app).await;
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(serde_json::json!({"text": "  "}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(serde_json::json!({"text": "hi"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    let (s, v) = call(&app, "GET", "/sessions/ffff", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["error"].is_string());
    let (s, _) = call(&app, "POST", "/sessions/ffff/messages", Some(serde_json::json!({"text": "hi"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let state = Arc::new(AppState::new(DialogueSystem::default(), &ServiceConfig::default()).with_ttl(Duration::from_millis(20)));
    let app = router(state.clone());
    let id = open(&app).await;
    let _keep = open(&app).await;
    tokio::time::sleep(Duration::from_millis(40)).await;
    let (s, _) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(state.sweep().await, 1);
    assert!(state.is_empty().await);
}

#[tokio::test]
async fn concurrent_posts_are_serialized() {
    let (state, app) = app_with(DialogueSystem::default(), &ServiceConfig::default());
    let id = open(&app).await;
    let mut handles = Vec::new();
    for i in 0..8 {
        let app = app.clone();
        let id = id.clone();
        handles.push(tokio::spawn(async move {
            let msg = acts_msg(&format!("message {i}"), &[DialogAct::new("Hotel", "Request", "Phone", "?")]);
            call(&app, "POST", &format!("/sessions/{id}/messages"), Some(msg)).await
        }));
    }
    let mut turns = Vec::new();
    for h in handles {
        let (s, v) = h.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        turns.push(serde_json::from_value::<MessageResponse>(v).unwrap().turn);
    }
    turns.sort();
    assert_eq!(turns, (0..8).collect::<Vec<_>>());
    let snap = state.snapshot(&id).await.unwrap();
    assert_eq!(snap.transcript.iter().map(|t| t.turn).collect::<Vec<_>>(), (0..8).collect::<Vec<_>>());
}

#[tokio::test]
async fn transcripts_are_appended_to_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServiceConfig {
        persist_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    };
    let (_, app) = app_with(DialogueSystem::default(), &cfg);
    let id = open(&app).await;
    for _ in 0..2 {
        let msg = acts_msg("a museum", &[DialogAct::new("Attraction", "Inform", "Type", "museum")]);
        call(&app, "POST", &format!("/sessions/{id}/messages"), Some(msg)).await;
    }
    let text = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["event"], "open");
    assert_eq!(lines[2]["turn"]["turn"], 1);
}

fn small_nlu_system() -> DialogueSystem {
    let corpus = generate_toy_corpus(
        &DialogueSystem::default(),
        &ToyConfig {
            train_dialogues: 40,
            valid_dialogues: 4,
            test_dialogues: 1,
            ..ToyConfig::default()
        },
    )
    .unwrap();
    let tc = TrainConfig { epochs: 2, batch_size: 8, ..TrainConfig::default() };
    let p = train_toy(
        &examples_from_corpus(&corpus.train).unwrap(),
        &examples_from_corpus(&corpus.valid).unwrap(),
        toy_nlu_config(),
        &tc,
    )
    .unwrap()
    .pipeline;
    DialogueSystem::default().with_nlu(p)
}

#[tokio::test]
async fn text_turns_replay_identically() {
    let system = small_nlu_system();
    let script = ["i prefer something related to museum .", "what is the address ?", "i need a hotel in the north .", "thanks , bye ."];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let (state, app) = app_with(system.clone(), &ServiceConfig { seed: 3, ..ServiceConfig::default() });
        let id = open(&app).await;
        for line in script {
            let (s, v) = call(&app, "POST", &format!("/sessions/{id}/messages"), Some(serde_json::json!({ "text": line }))).await;
            if s == StatusCode::CONFLICT {
                break;
            }
            assert_eq!(s, StatusCode::OK, "{v}");
            assert!(v["nlu"]["intent_probs"].is_object());
        }
        let snap = state.snapshot(&id).await.unwrap();
        runs.push(
            snap.transcript
                .into_iter()
                .map(|t| (t.user, t.acts, t.action, t.utterance))
                .collect::<Vec<_>>(),
        );
    }
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}
