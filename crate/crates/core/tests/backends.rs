//! External backends against local fakes: a shell-script FreeCAD, an HTTP
//! scorer sidecar, and an OpenAI-compatible chat endpoint.

mod common;

use std::net::SocketAddr;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use cadrefine::executor::{
    Dialect, ErrorClass, Executor, FreecadExecutor, MacroDocument, RenderArtifact, RenderKind,
};
use cadrefine::llm::{
    build_provider, ChatMessage, HttpChatProvider, LlmClient, PromptSet, Provider, ProviderError,
    ProviderSpec, ReplayEntry, ReplayProvider, Role,
};
use cadrefine::pipeline::{ExecutorKind, OwnedDeps, PipelineConfig};
use cadrefine::scorer::{RemoteScorer, ScoreBackend, Scorer, ScorerError};
use cadrefine::store::{EventBody, EventStore, FileStore};
use cadrefine::RunStatus;
use serde_json::{json, Value};

const FAKE_FREECAD: &str = r#"#!/bin/sh
macro="$1"
if grep -q FAIL_RUNTIME "$macro"; then
  echo 'Traceback (most recent call last):' >&2
  echo "NameError: name 'Part' is not defined" >&2
  exit 1
fi
if grep -q HANG "$macro"; then exec sleep 5; fi
if grep -q NO_RENDER "$macro"; then exit 0; fi
printf 'PNG:' > render.png
grep -o 'VARIANT_[A-Z0-9]*' "$macro" | head -n 1 >> render.png
"#;

fn fake_freecad(dir: &Path) -> PathBuf {
    let path = dir.join("freecad");
    std::fs::write(&path, FAKE_FREECAD).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn py(text: &str) -> MacroDocument {
    MacroDocument {
        text: text.into(),
        dialect: Dialect::FreecadPython,
        version_index: 0,
    }
}

fn serve(router: Router) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap()
            .block_on(async move {
                let l = tokio::net::TcpListener::from_std(listener).unwrap();
                axum::serve(l, router).await.unwrap();
            })
    });
    format!("http://{addr}")
}

#[test]
fn freecad_success_writes_png() {
    let dir = tempfile::tempdir().unwrap();
    let exe = FreecadExecutor::new(fake_freecad(dir.path()));
    let work = dir.path().join("w");
    std::fs::create_dir(&work).unwrap();
    let (res, render) = exe.execute(&py("box = 1  # VARIANT_A"), &work, Duration::from_secs(10));
    assert!(res.is_ok(), "{res:?}");
    let render = render.unwrap();
    assert_eq!(render.kind, RenderKind::Png);
    assert_eq!(
        std::fs::read(&render.path_or_hash).unwrap(),
        b"PNG:VARIANT_A\n"
    );
    // the wrapped macro embeds the user source as a string literal
    let wrapped = std::fs::read_to_string(work.join("macro.FCMacro")).unwrap();
    assert!(wrapped.contains(r#"_USER_SOURCE = "box = 1  # VARIANT_A""#));
    assert!(wrapped.contains("saveImage"));
}

#[test]
fn freecad_traceback_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let exe = FreecadExecutor::new(fake_freecad(dir.path()));
    let (res, render) = exe.execute(&py("FAIL_RUNTIME"), dir.path(), Duration::from_secs(10));
    assert!(render.is_none());
    assert_eq!(res.error_class, Some(ErrorClass::Runtime));
    let msg = res.error_message.unwrap();
    assert!(msg.starts_with("Traceback"));
    assert!(msg.contains("NameError"));
}

#[test]
fn freecad_missing_render_is_capture_failure() {
    let dir = tempfile::tempdir().unwrap();
    let exe = FreecadExecutor::new(fake_freecad(dir.path()));
    let (res, render) = exe.execute(&py("NO_RENDER"), dir.path(), Duration::from_secs(10));
    assert!(render.is_none());
    assert_eq!(res.error_class, Some(ErrorClass::Runtime));
    assert!(res
        .error_message
        .unwrap()
        .starts_with("render capture failed"));
}

#[test]
fn freecad_timeout_kills_the_process() {
    let dir = tempfile::tempdir().unwrap();
    let exe = FreecadExecutor::new(fake_freecad(dir.path()));
    let t = Instant::now();
    let (res, _) = exe.execute(&py("HANG"), dir.path(), Duration::from_millis(300));
    assert_eq!(res.error_class, Some(ErrorClass::Timeout));
    assert!(t.elapsed() < Duration::from_secs(3), "{:?}", t.elapsed());
}

#[test]
fn freecad_stale_render_is_not_reused() {
    let dir = tempfile::tempdir().unwrap();
    let exe = FreecadExecutor::new(fake_freecad(dir.path()));
    let (ok, _) = exe.execute(&py("# VARIANT_A"), dir.path(), Duration::from_secs(10));
    assert!(ok.is_ok());
    let (res, render) = exe.execute(&py("NO_RENDER"), dir.path(), Duration::from_secs(10));
    assert!(!res.is_ok());
    assert!(render.is_none());
}

#[derive(Default)]
struct Sidecar {
    scores: Mutex<Vec<(String, Vec<u8>)>>,
    captions: AtomicUsize,
    score_override: Mutex<Option<Value>>,
    caption_override: Mutex<Option<(StatusCode, Value)>>,
}

fn decode(body: &Value) -> Vec<u8> {
    base64::engine::general_purpose::STANDARD
        .decode(body["image_png_base64"].as_str().unwrap())
        .unwrap()
}

fn sidecar() -> (String, Arc<Sidecar>) {
    let state = Arc::new(Sidecar::default());
    let router = Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route(
            "/v1/score",
            post(
                |State(s): State<Arc<Sidecar>>, Json(body): Json<Value>| async move {
                    let image = decode(&body);
                    let query = body["query"].as_str().unwrap().to_string();
                    let good = image.windows(4).any(|w| w == b"GOOD");
                    s.scores.lock().unwrap().push((query, image));
                    if let Some(v) = s.score_override.lock().unwrap().clone() {
                        return Json(v);
                    }
                    Json(json!({ "score": if good { 0.95 } else { 0.3 } }))
                },
            ),
        )
        .route(
            "/v1/caption",
            post(
                |State(s): State<Arc<Sidecar>>, Json(body): Json<Value>| async move {
                    assert!(!decode(&body).is_empty());
                    s.captions.fetch_add(1, Ordering::SeqCst);
                    if let Some((code, v)) = s.caption_override.lock().unwrap().clone() {
                        return (code, Json(v));
                    }
                    (
                        StatusCode::OK,
                        Json(json!({ "caption": "a plain grey box" })),
                    )
                },
            ),
        )
        .with_state(state.clone());
    (serve(router), state)
}

fn png_render(dir: &Path, bytes: &[u8]) -> RenderArtifact {
    let path = dir.join("render.png");
    std::fs::write(&path, bytes).unwrap();
    RenderArtifact::png(&path)
}

#[test]
fn remote_scorer_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let (url, state) = sidecar();
    let scorer = RemoteScorer::new(format!("{url}/"), Duration::from_secs(5));
    assert!(scorer.healthy());
    let render = png_render(dir.path(), b"PNG:GOOD");

    let s = scorer.score(&render, "a 10mm cube").unwrap();
    assert_eq!(s.value, 0.95);
    assert_eq!(s.backend, ScoreBackend::Remote);
    let (query, image) = state.scores.lock().unwrap()[0].clone();
    assert_eq!(query, "a 10mm cube");
    assert_eq!(image, b"PNG:GOOD");

    assert_eq!(scorer.caption(&render).unwrap().text, "a plain grey box");

    *state.score_override.lock().unwrap() = Some(json!({ "score": 1.5 }));
    assert!(matches!(
        scorer.score(&render, "q"),
        Err(ScorerError::Protocol(_))
    ));
    *state.score_override.lock().unwrap() = Some(json!({ "value": 0.5 }));
    assert!(matches!(
        scorer.score(&render, "q"),
        Err(ScorerError::Protocol(_))
    ));

    *state.caption_override.lock().unwrap() = Some((StatusCode::OK, json!({ "caption": " " })));
    assert!(matches!(
        scorer.caption(&render),
        Err(ScorerError::Protocol(_))
    ));
    *state.caption_override.lock().unwrap() =
        Some((StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "oom" })));
    assert!(matches!(
        scorer.caption(&render),
        Err(ScorerError::Sidecar(_))
    ));

    assert!(matches!(
        scorer.score(&render, ""),
        Err(ScorerError::EmptyQuery)
    ));
}

#[test]
fn remote_scorer_unreachable_and_wrong_render() {
    let dir = tempfile::tempdir().unwrap();
    // bind then drop to get a port nobody listens on
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let scorer = RemoteScorer::new(format!("http://127.0.0.1:{port}"), Duration::from_secs(2));
    assert!(!scorer.healthy());
    let render = png_render(dir.path(), b"PNG");
    assert!(matches!(
        scorer.score(&render, "q"),
        Err(ScorerError::Sidecar(_))
    ));

    let descriptor = RenderArtifact::descriptor(common::scene("box a 1 1 1"));
    assert!(matches!(
        scorer.score(&descriptor, "q"),
        Err(ScorerError::Config(_))
    ));
    let missing = RenderArtifact::png(&dir.path().join("nope.png"));
    assert!(matches!(
        scorer.score(&missing, "q"),
        Err(ScorerError::Render(_))
    ));
}

#[test]
fn freecad_pipeline_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let (url, state) = sidecar();
    let fence =
        |body: &str| ReplayEntry::Response(format!("1. Make the part.\n\n```python\n{body}\n```"));
    let provider = Arc::new(ReplayProvider::new(
        "fc",
        vec![
            fence("FAIL_RUNTIME"),
            fence("import FreeCAD\n# VARIANT_FIRST"),
            fence("import FreeCAD\n# VARIANT_GOOD"),
        ],
    ));
    let deps = OwnedDeps {
        llm: LlmClient::new(provider.clone(), PromptSet::builtin("freecad").unwrap()),
        executor: Box::new(FreecadExecutor::new(fake_freecad(dir.path()))),
        scorer: Box::new(RemoteScorer::new(url, Duration::from_secs(5))),
    };
    let cfg = PipelineConfig {
        executor_kind: ExecutorKind::Freecad,
        llm_provider: ProviderSpec::replay("unused", "fc"),
        ..PipelineConfig::default()
    };
    let store = FileStore::open(dir.path().join("store")).unwrap();
    let query = "A CAD design of a cube with a side length of 10mm.";
    let rec = cadrefine::run_query(query, &cfg, &deps.borrow(&store, None)).unwrap();

    assert_eq!(rec.status, RunStatus::Success);
    assert_eq!(common::versions(&rec), vec![2, 1]);
    assert_eq!(rec.attempts[0].score.unwrap().value, 0.3);
    assert_eq!(
        rec.attempts[0].caption.as_ref().unwrap().text,
        "a plain grey box"
    );
    assert_eq!(rec.attempts[1].score.unwrap().value, 0.95);
    assert_eq!(state.captions.load(Ordering::SeqCst), 1);
    let scored = state.scores.lock().unwrap().clone();
    assert_eq!(scored.len(), 2);
    assert!(scored.iter().all(|(q, _)| q == query));

    // renders are copied into the run's artifacts
    let png = store
        .read_artifact(&rec.run_id, "attempt-1/render.png")
        .unwrap();
    assert_eq!(png, b"PNG:VARIANT_GOOD\n");
    let question = store
        .events(&rec.run_id)
        .unwrap()
        .into_iter()
        .find_map(|e| match e.body {
            EventBody::Scored { question, .. } => Some(question),
            _ => None,
        });
    assert_eq!(
        question.unwrap(),
        cadrefine::scorer::vqa_question(query).unwrap()
    );
    // the traceback went back to the model
    let second = &provider.requests()[1];
    assert!(second.last().unwrap().content.contains("NameError"));
    common::assert_replays(&store, &rec);
}

#[derive(Default)]
struct Chat {
    failures_left: AtomicUsize,
    fail_status: Mutex<u16>,
    seen: Mutex<Vec<(Option<String>, Value)>>,
}

fn chat_server() -> (String, Arc<Chat>) {
    let state = Arc::new(Chat::default());
    let router = Router::new()
        .route(
            "/v1/chat/completions",
            post(
                |State(s): State<Arc<Chat>>, headers: HeaderMap, Json(body): Json<Value>| async move {
                    let auth = headers
                        .get("authorization")
                        .map(|v| v.to_str().unwrap().to_string());
                    s.seen.lock().unwrap().push((auth, body));
                    if s.failures_left.load(Ordering::SeqCst) > 0 {
                        s.failures_left.fetch_sub(1, Ordering::SeqCst);
                        let code = StatusCode::from_u16(*s.fail_status.lock().unwrap()).unwrap();
                        return (code, Json(json!({ "error": "try later" })));
                    }
                    (
                        StatusCode::OK,
                        Json(json!({ "choices": [{ "message": { "role": "assistant", "content": "hello" } }] })),
                    )
                },
            ),
        )
        .with_state(state.clone());
    (format!("{}/v1/chat/completions", serve(router)), state)
}

fn spec(endpoint: &str, retries: u32, credential: Option<&str>) -> ProviderSpec {
    ProviderSpec {
        max_retries: retries,
        credential: credential.map(str::to_string),
        temperature: 0.2,
        ..ProviderSpec::http_chat(endpoint, "test-model")
    }
}

fn msgs() -> Vec<ChatMessage> {
    vec![
        ChatMessage::new(Role::System, "sys"),
        ChatMessage::new(Role::User, "make a cube"),
    ]
}

#[test]
fn chat_retries_transient_failures() {
    let (url, state) = chat_server();
    state.failures_left.store(2, Ordering::SeqCst);
    *state.fail_status.lock().unwrap() = 503;
    std::env::set_var("CADREFINE_TEST_CHAT_KEY", "sekrit");
    let p = HttpChatProvider::from_spec(&spec(&url, 2, Some("CADREFINE_TEST_CHAT_KEY")))
        .unwrap()
        .with_backoff(Duration::from_millis(1));
    assert_eq!(p.complete(&msgs()).unwrap(), "hello");
    let seen = state.seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    let (auth, body) = &seen[0];
    assert_eq!(auth.as_deref(), Some("Bearer sekrit"));
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.2);
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], "make a cube");
}

#[test]
fn chat_gives_up_after_retry_budget() {
    let (url, state) = chat_server();
    state.failures_left.store(5, Ordering::SeqCst);
    *state.fail_status.lock().unwrap() = 429;
    let p = HttpChatProvider::from_spec(&spec(&url, 1, None))
        .unwrap()
        .with_backoff(Duration::from_millis(1));
    assert!(matches!(
        p.complete(&msgs()),
        Err(ProviderError::Status { status: 429, .. })
    ));
    assert_eq!(state.seen.lock().unwrap().len(), 2);
}

#[test]
fn chat_client_errors_are_not_retried() {
    let (url, state) = chat_server();
    state.failures_left.store(1, Ordering::SeqCst);
    *state.fail_status.lock().unwrap() = 400;
    let p = HttpChatProvider::from_spec(&spec(&url, 3, None))
        .unwrap()
        .with_backoff(Duration::from_millis(1));
    assert!(matches!(
        p.complete(&msgs()),
        Err(ProviderError::Status { status: 400, .. })
    ));
    assert_eq!(state.seen.lock().unwrap().len(), 1);
}

#[test]
fn chat_missing_credential_is_reported() {
    let s = spec("http://127.0.0.1:9/x", 0, Some("CADREFINE_TEST_UNSET_VAR"));
    std::env::remove_var("CADREFINE_TEST_UNSET_VAR");
    assert!(matches!(
        build_provider(&s),
        Err(ProviderError::Credential(_))
    ));
}
