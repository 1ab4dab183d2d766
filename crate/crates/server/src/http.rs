use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use moralgrid_core::protocol::{Request, Response as StepResponse, Session, SessionDefaults};
use moralgrid_core::scenario::ScenarioError;
use moralgrid_core::service::{
    EvaluateRequest, PlayRequest, ScoreRequest, Selection, Service, SolveRequest, TrainRequest,
};
use moralgrid_core::Error;
use serde::{Deserialize, Serialize};

/// Open HTTP sessions allowed at once.
pub const MAX_SESSIONS: usize = 256;

#[derive(Clone)]
pub struct AppState {
    service: Service,
    defaults: SessionDefaults,
    sessions: Arc<Mutex<HashMap<u64, Session>>>,
    next_id: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(service: Service, defaults: SessionDefaults) -> Self {
        Self {
            service,
            defaults,
            sessions: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    kind: &'static str,
}

struct ApiError(StatusCode, String);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Scenario(ScenarioError::UnknownScenario(_) | ScenarioError::UnknownVariant(_)) => StatusCode::NOT_FOUND,
            Error::Resource(_) => StatusCode::UNPROCESSABLE_ENTITY,
            e if e.is_config() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let kind = if self.0.is_client_error() { "config" } else { "runtime" };
        (self.0, Json(ErrorBody { error: self.1, kind })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs CPU-bound work off the async workers.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, Error> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map(Json).map_err(ApiError::from),
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}"))),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/scenarios", get(list_scenarios))
        .route("/v1/scenarios/{name}", get(describe_scenario))
        .route("/v1/scenarios/{name}/render", get(render_scenario))
        .route("/v1/chain", post(chain))
        .route("/v1/evaluate", post(evaluate))
        .route("/v1/solve", post(solve))
        .route("/v1/score", post(score))
        .route("/v1/train", post(train))
        .route("/v1/play", post(play))
        .route("/v1/sessions", post(open_session))
        .route("/v1/sessions/{id}", post(session_request).delete(close_session))
        .with_state(state)
}

async fn health() -> Json<BTreeMap<&'static str, &'static str>> {
    Json(BTreeMap::from([("status", "ok"), ("version", env!("CARGO_PKG_VERSION"))]))
}

async fn list_scenarios(State(s): State<AppState>) -> Json<Vec<moralgrid_core::service::ScenarioSummary>> {
    Json(s.service.list())
}

#[derive(Debug, Deserialize)]
struct VariantQuery {
    variant: Option<String>,
}

async fn describe_scenario(
    State(s): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<VariantQuery>,
) -> ApiResult<moralgrid_core::service::ScenarioDetail> {
    Ok(Json(s.service.describe(&name, q.variant.as_deref())?))
}

async fn render_scenario(
    State(s): State<AppState>,
    Path(name): Path<String>,
    Query(q): Query<VariantQuery>,
) -> Result<String, ApiError> {
    let mut text = s.service.render(&name, q.variant.as_deref())?;
    text.push('\n');
    Ok(text)
}

async fn chain(State(s): State<AppState>, Json(sel): Json<Selection>) -> ApiResult<moralgrid_core::service::ChainDetail> {
    Ok(Json(s.service.chain(&sel)?))
}

async fn evaluate(State(s): State<AppState>, Json(req): Json<EvaluateRequest>) -> ApiResult<moralgrid_core::eval::EvaluationReport> {
    blocking(move || s.service.evaluate(&req)).await
}

async fn solve(State(s): State<AppState>, Json(req): Json<SolveRequest>) -> ApiResult<moralgrid_core::agents::SolveResult> {
    blocking(move || s.service.solve(&req)).await
}

async fn score(State(s): State<AppState>, Json(req): Json<ScoreRequest>) -> ApiResult<moralgrid_core::trace::ScoreReport> {
    blocking(move || s.service.score(&req)).await
}

async fn train(State(s): State<AppState>, Json(req): Json<TrainRequest>) -> ApiResult<moralgrid_core::service::TrainResponse> {
    blocking(move || s.service.train(&req)).await
}

async fn play(State(s): State<AppState>, Json(req): Json<PlayRequest>) -> ApiResult<moralgrid_core::service::PlayResponse> {
    blocking(move || s.service.play(&req)).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: u64,
}

async fn open_session(State(s): State<AppState>) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let mut sessions = s.sessions.lock().expect("session map poisoned");
    if sessions.len() >= MAX_SESSIONS {
        return Err(ApiError(
            StatusCode::SERVICE_UNAVAILABLE,
            format!("too many open sessions ({MAX_SESSIONS}); close some first"),
        ));
    }
    let id = s.next_id.fetch_add(1, Ordering::Relaxed);
    sessions.insert(id, Session::new(Arc::clone(s.service.catalogue()), s.defaults.clone()));
    Ok((StatusCode::CREATED, Json(SessionCreated { id })))
}

/// Same request and response shapes as the line protocol.
async fn session_request(
    State(s): State<AppState>,
    Path(id): Path<u64>,
    Json(req): Json<Request>,
) -> Result<Json<StepResponse>, ApiError> {
    let mut sessions = s.sessions.lock().expect("session map poisoned");
    let session = sessions
        .get_mut(&id)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no session {id}")))?;
    let resp = session.handle(&req);
    if session.is_closed() {
        sessions.remove(&id);
    }
    Ok(Json(resp))
}

async fn close_session(State(s): State<AppState>, Path(id): Path<u64>) -> StatusCode {
    match s.sessions.lock().expect("session map poisoned").remove(&id) {
        Some(_) => StatusCode::NO_CONTENT,
        None => StatusCode::NOT_FOUND,
    }
}

/// Serves the HTTP API on `listener` until the task is dropped.
pub async fn serve_http(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
