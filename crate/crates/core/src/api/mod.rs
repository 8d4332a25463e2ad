//! HTTP surface under `/v1`, plus static UI assets at `/`.
//!
//! All run state lives in the event store; the only in-memory state is the
//! mailbox registry for runs that are still executing.

use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;
use tracing::{error, info};

use crate::feedback::{record_verdict, FeedbackError, FeedbackHub};
use crate::pipeline::{
    new_run_id, OwnedDeps, PipelineConfig, PipelineError, RunSession, RunStatus,
};
use crate::store::{list_runs, load_run, sanitize_artifact_name, EventStore, RunEvent, StoreError};

pub const DEFAULT_LONG_POLL: Duration = Duration::from_secs(25);
const POLL_INTERVAL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub bind: SocketAddr,
    /// Built operator UI, served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Required as `Authorization: Bearer <token>` on mutating endpoints.
    pub auth_token: Option<String>,
    pub long_poll: Duration,
    /// Directory of benchmark outputs (`<dir>/<name>/metrics.json`).
    pub reports_dir: Option<PathBuf>,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            bind: ([127, 0, 0, 1], 8080).into(),
            static_dir: None,
            auth_token: None,
            long_poll: DEFAULT_LONG_POLL,
            reports_dir: None,
        }
    }
}

/// Builds collaborators for a run accepted over HTTP.
pub trait RunLauncher: Send + Sync {
    fn build(&self, config: &PipelineConfig) -> Result<OwnedDeps, String>;
}

impl<F> RunLauncher for F
where
    F: Fn(&PipelineConfig) -> Result<OwnedDeps, String> + Send + Sync,
{
    fn build(&self, config: &PipelineConfig) -> Result<OwnedDeps, String> {
        self(config)
    }
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<dyn EventStore>,
    pub hub: Arc<FeedbackHub>,
    pub launcher: Arc<dyn RunLauncher>,
    /// Defaults that request overrides are applied to.
    pub base_config: PipelineConfig,
    pub api: ApiConfig,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
    fn bad_request(m: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, m)
    }
    fn conflict(m: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, m)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) | StoreError::ArtifactNotFound(_) => StatusCode::NOT_FOUND,
            StoreError::InvalidName(_) => StatusCode::BAD_REQUEST,
            StoreError::Sequence(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl From<FeedbackError> for ApiError {
    fn from(e: FeedbackError) -> Self {
        match e {
            FeedbackError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, e.to_string()),
            FeedbackError::NotTerminal(_) | FeedbackError::NotAwaiting(_) => {
                Self::conflict(e.to_string())
            }
            FeedbackError::EmptyCaption => Self::bad_request(e.to_string()),
            FeedbackError::Store(s) => s.into(),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    let static_dir = state.api.static_dir.clone();
    let api = Router::new()
        .route("/v1/runs", post(create_run).get(get_runs))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/runs/{id}/events", get(get_events))
        .route("/v1/runs/{id}/caption", post(post_caption))
        .route("/v1/runs/{id}/verdict", post(post_verdict))
        .route("/v1/runs/{id}/artifacts/{*name}", get(get_artifact))
        .route("/v1/reports", get(get_reports))
        .route("/v1/reports/{name}", get(get_report))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(state.api.bind).await?;
    info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}

fn check_auth(state: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    let Some(token) = &state.api.auth_token else {
        return Ok(());
    };
    let presented = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(token.as_str()) {
        Ok(())
    } else {
        Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "missing or invalid bearer token",
        ))
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

#[derive(Debug, Deserialize)]
pub struct CreateRun {
    pub query: String,
    #[serde(default)]
    pub config_overrides: Option<Value>,
}

/// Applies top-level override keys to the base configuration.
pub fn merge_config(
    base: &PipelineConfig,
    overrides: Option<&Value>,
) -> Result<PipelineConfig, String> {
    let mut merged = serde_json::to_value(base).map_err(|e| e.to_string())?;
    match overrides {
        None | Some(Value::Null) => {}
        Some(Value::Object(o)) => {
            let target = merged.as_object_mut().expect("config is an object");
            for (k, v) in o {
                if !target.contains_key(k) {
                    return Err(format!("unknown config key '{k}'"));
                }
                target.insert(k.clone(), v.clone());
            }
        }
        Some(_) => return Err("config_overrides must be an object".into()),
    }
    let cfg: PipelineConfig = serde_json::from_value(merged).map_err(|e| e.to_string())?;
    cfg.validate()?;
    Ok(cfg)
}

async fn create_run(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<CreateRun>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    check_auth(&state, &headers)?;
    if body.query.trim().is_empty() {
        return Err(ApiError::bad_request("query must not be empty"));
    }
    let config = merge_config(&state.base_config, body.config_overrides.as_ref())
        .map_err(ApiError::bad_request)?;
    let deps = state
        .launcher
        .build(&config)
        .map_err(ApiError::bad_request)?;

    let run_id = new_run_id();
    let mailbox = state.hub.register(&run_id);
    let session = {
        let (store, id, query) = (state.store.clone(), run_id.clone(), body.query.clone());
        blocking(move || RunSession::begin(store.as_ref(), Some(id), &query, config)).await?
    };
    let session = match session {
        Ok(s) => s,
        Err(e) => {
            state.hub.remove(&run_id);
            return Err(match e {
                PipelineError::EmptyQuery | PipelineError::Config(_) => {
                    ApiError::bad_request(e.to_string())
                }
                PipelineError::Store(s) => s.into(),
            });
        }
    };

    let (store, hub, id) = (state.store.clone(), state.hub.clone(), run_id.clone());
    tokio::task::spawn_blocking(move || {
        let result = session.drive(&deps.borrow(store.as_ref(), Some(&mailbox)));
        hub.remove(&id);
        match result {
            Ok(rec) => info!(run_id = %id, status = ?rec.status, "run finished"),
            Err(e) => error!(run_id = %id, error = %e, "run failed to persist"),
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "run_id": run_id }))))
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    status: Option<RunStatus>,
}

async fn get_runs(
    State(state): State<AppState>,
    Query(q): Query<ListQuery>,
) -> ApiResult<Json<Value>> {
    let store = state.store.clone();
    let runs = blocking(move || list_runs(store.as_ref(), q.status)).await??;
    Ok(Json(json!({ "runs": runs })))
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let store = state.store.clone();
    let rec = blocking(move || load_run(store.as_ref(), &id)).await??;
    Ok(Json(serde_json::to_value(rec).expect("record serialises")))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: u64,
}

#[derive(Debug, Serialize)]
struct EventPage {
    events: Vec<RunEvent>,
    last_seq: u64,
}

/// Events with `seq > since`, waiting up to the long-poll window for new ones.
async fn get_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> ApiResult<Json<EventPage>> {
    let until = Instant::now() + state.api.long_poll;
    loop {
        let (store, rid) = (state.store.clone(), id.clone());
        let events = blocking(move || store.events(&rid)).await??;
        let last_seq = events.last().map_or(0, |e| e.seq);
        let fresh: Vec<RunEvent> = events.into_iter().filter(|e| e.seq > q.since).collect();
        if !fresh.is_empty() || Instant::now() >= until {
            return Ok(Json(EventPage {
                events: fresh,
                last_seq,
            }));
        }
        tokio::time::sleep(POLL_INTERVAL.min(until.saturating_duration_since(Instant::now())))
            .await;
    }
}

#[derive(Debug, Deserialize)]
struct CaptionBody {
    caption: String,
}

async fn post_caption(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(body): Json<CaptionBody>,
) -> ApiResult<StatusCode> {
    check_auth(&state, &headers)?;
    if body.caption.trim().is_empty() {
        return Err(ApiError::bad_request("caption must not be empty"));
    }
    let (store, rid) = (state.store.clone(), id.clone());
    let rec = blocking(move || load_run(store.as_ref(), &rid)).await??;
    if rec.status != RunStatus::AwaitingFeedback {
        return Err(ApiError::conflict(format!(
            "run is {:?}, not awaiting feedback",
            rec.status
        )));
    }
    state.hub.deliver(&id, &body.caption)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
struct VerdictBody {
    success: bool,
}

async fn post_verdict(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(body): Json<VerdictBody>,
) -> ApiResult<StatusCode> {
    check_auth(&state, &headers)?;
    let store = state.store.clone();
    blocking(move || record_verdict(store.as_ref(), &id, body.success)).await??;
    Ok(StatusCode::NO_CONTENT)
}

pub fn content_type(name: &str) -> &'static str {
    match FsPath::new(name).extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("json") => "application/json",
        Some("txt") | Some("FCMacro") | Some("py") => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

async fn get_artifact(
    State(state): State<AppState>,
    Path((id, name)): Path<(String, String)>,
) -> ApiResult<Response> {
    sanitize_artifact_name(&name)?;
    let store = state.store.clone();
    let ct = content_type(&name);
    let bytes = blocking(move || {
        store.events(&id)?;
        store.read_artifact(&id, &name)
    })
    .await??;
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static(ct))],
        bytes,
    )
        .into_response())
}

fn report_names(dir: &FsPath) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.path().join("metrics.json").is_file())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    names.sort();
    names
}

async fn get_reports(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let names = match &state.api.reports_dir {
        Some(dir) => report_names(dir),
        None => Vec::new(),
    };
    Ok(Json(json!({ "reports": names })))
}

async fn get_report(
    State(state): State<AppState>,
    Path(name): Path<String>,
) -> ApiResult<Json<Value>> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, format!("report '{name}' not found"));
    let dir = state.api.reports_dir.as_ref().ok_or_else(not_found)?;
    if !report_names(dir).contains(&name) {
        return Err(not_found());
    }
    let text =
        std::fs::read_to_string(dir.join(&name).join("metrics.json")).map_err(|_| not_found())?;
    let value = serde_json::from_str(&text)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(value))
}
