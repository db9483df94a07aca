//! HTTP gateway over a [`GovernanceEngine`].
//!
//! One engine sits behind a mutex; every request locks it briefly, and a
//! background worker drains the job queue one job at a time. Event
//! subscribers long-poll `/events`, woken through a watch channel carrying
//! the latest event sequence number.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};
use tokio::sync::{watch, Notify};

use governor_core::auth::Capability;
use governor_core::charter::{load_charter, load_charter_file, CharterLoadError};
use governor_core::clock::{format_utc, Clock, SystemClock};
use governor_core::engine::{EngineSetup, GovernanceError};
use governor_core::money::Cents;
use governor_core::GovernanceEngine;

pub const CHARTER_ENV: &str = "GOVERNOR_CHARTER";
pub const STORE_ENV: &str = "GOVERNOR_STORE";
pub const OPENAPI_YAML: &str = include_str!("../openapi.yaml");

const DEFAULT_POLL_MS: u64 = 25_000;
const MAX_POLL_MS: u64 = 60_000;
const DEFAULT_PAGE: usize = 1000;

/// Builds the bundled example engine with an optional charter file and store directory.
pub fn build_engine(
    charter: Option<&Path>,
    store: Option<&Path>,
    clock: Arc<dyn Clock>,
) -> anyhow::Result<GovernanceEngine> {
    let mut setup = EngineSetup::example(clock);
    if let Some(path) = charter {
        setup.charter = load_charter_file(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    }
    setup.store_dir = store.map(Path::to_path_buf);
    Ok(GovernanceEngine::new(setup)?)
}

pub fn system_clock() -> Arc<dyn Clock> {
    Arc::new(SystemClock)
}

/// `{ok, data, error}`; `error` is present exactly when `ok` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEnvelope<T> {
    pub ok: bool,
    pub data: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    /// Offending field for charter validation failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { code: code.to_string(), message: message.into(), path: None } }
    }

    fn not_found(what: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("unknown {what}"))
    }
}

/// HTTP status for an engine error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "VALIDATION" => StatusCode::BAD_REQUEST,
        "NOT_FOUND" => StatusCode::NOT_FOUND,
        "INVALID_STATE" => StatusCode::CONFLICT,
        "PERMISSION_DENIED" => StatusCode::FORBIDDEN,
        "PAYMENT_DECLINED" => StatusCode::PAYMENT_REQUIRED,
        "AUDIT_UNAVAILABLE" => StatusCode::SERVICE_UNAVAILABLE,
        "PLAN_REJECTED" | "UNPROFITABLE_JOB" | "FISCAL_INSOLVENCY" | "NO_WORKERS" => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<GovernanceError> for ApiError {
    fn from(e: GovernanceError) -> Self {
        let code = match &e {
            // negative revenue is a bad request, not a storage fault
            GovernanceError::Ledger(governor_core::ledger::LedgerError::NegativeAmount(_)) => "VALIDATION",
            other => other.code(),
        };
        ApiError::new(status_for(code), code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let env: ApiEnvelope<Value> = ApiEnvelope { ok: false, data: None, error: Some(self.body) };
        (self.status, Json(env)).into_response()
    }
}

fn ok<T: Serialize>(data: T) -> Json<ApiEnvelope<T>> {
    Json(ApiEnvelope { ok: true, data: Some(data), error: None })
}

type ApiResult<T> = Result<Json<ApiEnvelope<T>>, ApiError>;

pub struct AppState {
    engine: Mutex<GovernanceEngine>,
    seq: watch::Sender<u64>,
    work: Notify,
    charter_path: Option<PathBuf>,
}

impl AppState {
    /// `charter_path`, when set, receives every accepted charter edit.
    pub fn new(engine: GovernanceEngine, charter_path: Option<PathBuf>) -> Arc<Self> {
        let (seq, _) = watch::channel(engine.last_event_seq());
        Arc::new(AppState { engine: Mutex::new(engine), seq, work: Notify::new(), charter_path })
    }

    pub fn engine(&self) -> MutexGuard<'_, GovernanceEngine> {
        // a panic mid-job leaves the engine consistent up to its last append
        self.engine.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn publish(&self, engine: &GovernanceEngine) {
        self.seq.send_replace(engine.last_event_seq());
    }

    /// Runs the next queued job. Returns false when the queue was empty.
    pub fn process_one(&self) -> bool {
        let mut engine = self.engine();
        let ran = engine.process_next().is_some();
        self.publish(&engine);
        ran
    }

    /// Drains the queue on the calling thread.
    pub fn process_pending(&self) -> usize {
        std::iter::from_fn(|| self.process_one().then_some(())).count()
    }

    /// Starts the background worker that drains the queue whenever work arrives.
    pub fn spawn_worker(self: &Arc<Self>) -> tokio::task::JoinHandle<()> {
        let state = self.clone();
        state.work.notify_one();
        tokio::spawn(async move {
            loop {
                state.work.notified().await;
                loop {
                    let s = state.clone();
                    match tokio::task::spawn_blocking(move || s.process_one()).await {
                        Ok(true) => continue,
                        _ => break,
                    }
                }
            }
        })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/missions", post(submit_mission))
        .route("/jobs", get(list_jobs))
        .route("/jobs/{id}", get(get_job).patch(edit_job).delete(delete_job))
        .route("/jobs/{id}/retry", post(retry_job))
        .route("/jobs/{id}/outcome", get(job_outcome))
        .route("/events", get(events))
        .route("/charter", get(get_charter).put(put_charter))
        .route("/trust", get(trust))
        .route("/tokens", get(tokens))
        .route("/ledger", get(ledger))
        .route("/verify-trail", post(verify_trail))
        .route("/health", get(health))
        .route("/openapi.yaml", get(openapi))
        .layer(tower_http::cors::CorsLayer::permissive())
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct MissionRequest {
    goal: String,
    #[serde(default)]
    revenue_cents: Option<i64>,
}

async fn submit_mission(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: MissionRequest = parse_json(&body)?;
    let job = {
        let mut engine = state.engine();
        let job = engine.submit_job(&req.goal, req.revenue_cents.map(Cents))?;
        state.publish(&engine);
        job
    };
    state.work.notify_one();
    Ok((StatusCode::ACCEPTED, ok(job)).into_response())
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "VALIDATION", e.to_string()))
}

async fn list_jobs(State(state): State<Arc<AppState>>) -> ApiResult<Value> {
    let engine = state.engine();
    let queue: Vec<&str> = engine.queue().collect();
    Ok(ok(json!({"jobs": engine.jobs(), "queue": queue})))
}

async fn get_job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Value> {
    let engine = state.engine();
    let job = engine.job(&id).ok_or_else(|| ApiError::not_found("job"))?;
    Ok(ok(serde_json::to_value(job).expect("job serializes")))
}

async fn job_outcome(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Value> {
    let engine = state.engine();
    if engine.job(&id).is_none() {
        return Err(ApiError::not_found("job"));
    }
    let outcome = engine.outcome(&id).ok_or_else(|| ApiError::not_found("outcome"))?;
    Ok(ok(json!({"outcome": outcome, "digest": outcome.digest(), "all_passed": outcome.all_passed()})))
}

fn double_option<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<i64>>, D::Error> {
    Option::<i64>::deserialize(d).map(Some)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EditRequest {
    #[serde(default)]
    goal: Option<String>,
    /// Absent leaves revenue alone; `null` clears it.
    #[serde(default, deserialize_with = "double_option")]
    revenue_cents: Option<Option<i64>>,
}

async fn edit_job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Value> {
    let req: EditRequest = parse_json(&body)?;
    if let Some(Some(r)) = req.revenue_cents {
        if r < 0 {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "VALIDATION", "revenue_cents must be non-negative"));
        }
    }
    let mut engine = state.engine();
    let job = engine.edit_job(&id, req.goal.as_deref(), req.revenue_cents.map(|r| r.map(Cents)))?;
    state.publish(&engine);
    Ok(ok(serde_json::to_value(job).expect("job serializes")))
}

async fn delete_job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Value> {
    let mut engine = state.engine();
    let job = engine.delete_job(&id)?;
    state.publish(&engine);
    Ok(ok(serde_json::to_value(job).expect("job serializes")))
}

async fn retry_job(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Value> {
    let job = {
        let mut engine = state.engine();
        let job = engine.retry_job(&id)?;
        state.publish(&engine);
        job
    };
    state.work.notify_one();
    Ok(ok(serde_json::to_value(job).expect("job serializes")))
}

#[derive(Debug, Deserialize)]
struct EventQuery {
    #[serde(default)]
    since: u64,
    timeout_ms: Option<u64>,
    limit: Option<usize>,
}

async fn events(State(state): State<Arc<AppState>>, Query(q): Query<EventQuery>) -> ApiResult<Value> {
    let wait = Duration::from_millis(q.timeout_ms.unwrap_or(DEFAULT_POLL_MS).min(MAX_POLL_MS));
    if !wait.is_zero() {
        let mut rx = state.seq.subscribe();
        let _ = tokio::time::timeout(wait, rx.wait_for(|s| *s > q.since)).await;
    }
    let engine = state.engine();
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).max(1);
    let page: Vec<_> = engine.decision_stream(q.since).iter().take(limit).collect();
    let next_since = page.last().map_or(q.since, |e| e.seq);
    Ok(ok(json!({
        "events": page,
        "next_since": next_since,
        "last_seq": engine.last_event_seq(),
    })))
}

async fn get_charter(State(state): State<Arc<AppState>>) -> ApiResult<Value> {
    let charter = state.engine().charter();
    Ok(ok(charter.to_document()))
}

/// Accepts the charter as YAML or JSON (JSON is valid YAML).
async fn put_charter(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Value> {
    let text = std::str::from_utf8(&body)
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "VALIDATION", "charter must be UTF-8"))?;
    let charter = load_charter(text).map_err(|e| match e {
        CharterLoadError::Invalid(v) => ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: ErrorBody { code: "VALIDATION".into(), message: v.to_string(), path: Some(v.path) },
        },
        other => ApiError::new(StatusCode::BAD_REQUEST, "VALIDATION", other.to_string()),
    })?;
    if let Some(path) = &state.charter_path {
        write_atomically(path, &charter.to_yaml()).map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "STORE", format!("cannot persist charter: {e}"))
        })?;
    }
    let mut engine = state.engine();
    engine.set_charter(charter);
    state.publish(&engine);
    Ok(ok(engine.charter().to_document()))
}

fn write_atomically(path: &Path, text: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("yaml.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)
}

async fn trust(State(state): State<Arc<AppState>>) -> ApiResult<Value> {
    let engine = state.engine();
    let auth = engine.trust();
    let agents: Vec<Value> = engine
        .registry()
        .iter()
        .map(|w| {
            let granted: Vec<Capability> = auth.granted(&w.worker_id);
            json!({
                "agent_id": w.worker_id,
                "score": auth.score(&w.worker_id),
                "granted": granted,
                "history": auth.record(&w.worker_id).map(|r| r.history.clone()).unwrap_or_default(),
            })
        })
        .collect();
    Ok(ok(json!({"agents": agents})))
}

async fn tokens(State(state): State<Arc<AppState>>) -> ApiResult<Value> {
    let engine = state.engine();
    Ok(ok(json!({
        "total_tokens_spent": engine.ledger().total_tokens_spent(),
        "usage": engine.token_usage(),
    })))
}

async fn ledger(State(state): State<Arc<AppState>>) -> ApiResult<Value> {
    let engine = state.engine();
    let reserve = engine.charter().fiscal_boundaries.min_reserve;
    let mut body = serde_json::to_value(engine.ledger().snapshot()).expect("snapshot serializes");
    body["runway_usd_cents"] = json!(engine.ledger().runway_usd_cents(reserve).get());
    body["entries"] = serde_json::to_value(engine.ledger().entries()).expect("entries serialize");
    Ok(ok(body))
}

async fn verify_trail(State(state): State<Arc<AppState>>) -> ApiResult<Value> {
    let engine = state.engine();
    let v = engine
        .review()
        .verify()
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "STORE", e.to_string()))?;
    Ok(ok(json!({
        "total": v.total,
        "failures": v.failures,
        "collisions": v.collisions,
        "clean": v.is_clean(),
    })))
}

async fn health(State(state): State<Arc<AppState>>) -> ApiResult<Value> {
    let engine = state.engine();
    let last = engine.decision_stream(0).last();
    Ok(ok(json!({
        "status": "ok",
        "last_event_seq": engine.last_event_seq(),
        "last_event_utc": last.map(|e| format_utc(&e.timestamp_utc)),
        "jobs": engine.jobs().len(),
        "queued": engine.queue().count(),
    })))
}

async fn openapi() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/yaml")], OPENAPI_YAML)
}
