//! Routes, handlers and the error envelope.
//!
//! Every stage endpoint checks the request synchronously (session exists,
//! stage legal, lease free, payload valid) and answers 404/409/422 right
//! away. Only then does it register a job, answer 202, and run the stage on
//! the blocking pool while holding the session lease.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderMap, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, MethodRouter};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use studio_core::codec;
use studio_core::model::{next_state, BinaryMask, EventKind, MaskSeed, SessionState, TRANSITIONS};
use studio_core::orchestrator::{
    ErrorKind, ImageSlot, MaskInput, NewSession, Orchestrator, OrchestratorError, Stage, StageRequest,
};
use uuid::Uuid;

use crate::jobs::{JobHandle, JobRegistry};

#[derive(Clone)]
pub struct AppState {
    pub orchestrator: Arc<Orchestrator>,
    pub jobs: Arc<JobRegistry>,
}

impl AppState {
    pub fn new(orchestrator: Orchestrator) -> Self {
        Self { orchestrator: Arc::new(orchestrator), jobs: Arc::default() }
    }
}

/// Body of every non-2xx response, and of `error` in a failed job.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), stage: None }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "Validation", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }
}

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        let (status, code) = match e.kind() {
            ErrorKind::NotFound => (StatusCode::NOT_FOUND, "NotFound"),
            ErrorKind::IllegalTransition => (StatusCode::CONFLICT, "IllegalTransition"),
            ErrorKind::SessionBusy => (StatusCode::CONFLICT, "SessionBusy"),
            ErrorKind::Validation | ErrorKind::Parse => (StatusCode::UNPROCESSABLE_ENTITY, "Validation"),
            ErrorKind::BackendUnavailable => (StatusCode::BAD_GATEWAY, "BackendUnavailable"),
            ErrorKind::Storage => (StatusCode::INTERNAL_SERVER_ERROR, "Storage"),
            ErrorKind::Config => (StatusCode::INTERNAL_SERVER_ERROR, "Config"),
        };
        // storage errors name files on disk; keep those in the log only
        let message = if e.kind() == ErrorKind::Storage {
            tracing::error!(error = %e, "storage failure");
            "artifact storage failed".to_owned()
        } else {
            e.to_string()
        };
        Self { status, code, message, stage: e.stage() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// One documented route.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RouteSpec {
    pub method: &'static str,
    pub path: &'static str,
    pub summary: &'static str,
    pub success: u16,
}

/// The published route table, served at `/spec`.
pub const ROUTES: &[RouteSpec] = &[
    RouteSpec { method: "POST", path: "/sessions", summary: "create a session from {initial_prompt, target_description, seed?}", success: 201 },
    RouteSpec { method: "GET", path: "/sessions", summary: "list session summaries, ?offset=&limit=", success: 200 },
    RouteSpec { method: "GET", path: "/sessions/{id}", summary: "full session record", success: 200 },
    RouteSpec { method: "POST", path: "/sessions/{id}/generate", summary: "render the initial image", success: 202 },
    RouteSpec { method: "POST", path: "/sessions/{id}/mask", summary: "set the mask from {seed} JSON or a multipart `mask` PNG", success: 202 },
    RouteSpec { method: "POST", path: "/sessions/{id}/refine", summary: "refine the target prompt, optional {user_edit}", success: 202 },
    RouteSpec { method: "POST", path: "/sessions/{id}/inpaint", summary: "inpaint the masked region", success: 202 },
    RouteSpec { method: "POST", path: "/sessions/{id}/score", summary: "score initial and inpainted images", success: 202 },
    RouteSpec { method: "POST", path: "/sessions/{id}/restart", summary: "archive the scored pass and return to Masked", success: 202 },
    RouteSpec { method: "GET", path: "/sessions/{id}/images/{slot}", summary: "PNG bytes, slot is initial, mask or inpainted", success: 200 },
    RouteSpec { method: "GET", path: "/jobs/{job_id}", summary: "job status, with the stage result once done", success: 200 },
    RouteSpec { method: "GET", path: "/healthz", summary: "backend reachability", success: 200 },
    RouteSpec { method: "GET", path: "/spec", summary: "this document", success: 200 },
];

/// Router plus a record of what was actually registered on it.
struct Registrar {
    router: Router<AppState>,
    registered: BTreeSet<(String, String)>,
}

impl Registrar {
    fn add(mut self, method: Method, path: &'static str, handler: MethodRouter<AppState>) -> Self {
        self.registered.insert((method.to_string(), path.to_owned()));
        self.router = self.router.route(path, handler);
        self
    }
}

fn registrar() -> Registrar {
    Registrar { router: Router::new(), registered: BTreeSet::new() }
        .add(Method::POST, "/sessions", post(create_session))
        .add(Method::GET, "/sessions", get(list_sessions))
        .add(Method::GET, "/sessions/{id}", get(get_session))
        .add(Method::POST, "/sessions/{id}/generate", post(generate))
        .add(Method::POST, "/sessions/{id}/mask", post(mask))
        .add(Method::POST, "/sessions/{id}/refine", post(refine))
        .add(Method::POST, "/sessions/{id}/inpaint", post(inpaint))
        .add(Method::POST, "/sessions/{id}/score", post(score))
        .add(Method::POST, "/sessions/{id}/restart", post(restart))
        .add(Method::GET, "/sessions/{id}/images/{slot}", get(image))
        .add(Method::GET, "/jobs/{job_id}", get(get_job))
        .add(Method::GET, "/healthz", get(healthz))
        .add(Method::GET, "/spec", get(spec))
}

/// `(method, path)` pairs registered on the router.
pub fn registered_routes() -> BTreeSet<(String, String)> {
    registrar().registered
}

pub fn router(state: AppState) -> Router {
    registrar()
        .router
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NoRoute", "no such route") })
        .with_state(state)
}

/// Route table plus the session state machine, for clients that enable
/// actions per state.
pub fn spec_document() -> Value {
    let stage_of = |event: EventKind| Stage::ALL.into_iter().find(|s| s.event() == event);
    let transitions: Vec<Value> = TRANSITIONS
        .iter()
        .map(|(from, event, to)| json!({ "from": from, "event": event, "stage": stage_of(*event), "to": to }))
        .collect();
    let actions: serde_json::Map<String, Value> = SessionState::ALL
        .iter()
        .map(|state| {
            let legal: Vec<Stage> = Stage::ALL.into_iter().filter(|s| next_state(*state, s.event()).is_some()).collect();
            (format!("{state:?}"), json!(legal))
        })
        .collect();
    json!({
        "routes": ROUTES,
        "states": SessionState::ALL,
        "stages": Stage::ALL,
        "transitions": transitions,
        "actions": actions,
        "job_statuses": ["pending", "running", "done", "failed"],
    })
}

async fn spec() -> Json<Value> {
    Json(spec_document())
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

/// Runs blocking orchestrator work off the async runtime.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, OrchestratorError> + Send + 'static,
) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", format!("worker failed: {e}"))),
    }
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let new: NewSession = parse_json(&body)?;
    let orch = state.orchestrator.clone();
    let record = blocking(move || orch.create_session(new)).await?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

#[derive(Debug, Deserialize)]
struct Page {
    #[serde(default)]
    offset: usize,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    50
}

const MAX_PAGE: usize = 200;

async fn list_sessions(State(state): State<AppState>, Query(page): Query<Page>) -> ApiResult<Json<Value>> {
    if page.limit == 0 || page.limit > MAX_PAGE {
        return Err(ApiError::validation(format!("limit must be in 1..={MAX_PAGE}")));
    }
    let orch = state.orchestrator.clone();
    let all = blocking(move || orch.list_sessions()).await?;
    let items: Vec<Value> = all
        .iter()
        .skip(page.offset)
        .take(page.limit)
        .map(|r| {
            json!({
                "session_id": r.session_id,
                "state": r.state,
                "initial_prompt": r.prompts.initial_prompt,
                "target_description": r.prompts.target_description,
                "created_at": r.created_at,
                "updated_at": r.updated_at,
            })
        })
        .collect();
    Ok(Json(json!({ "items": items, "total": all.len(), "offset": page.offset, "limit": page.limit })))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let orch = state.orchestrator.clone();
    let record = blocking(move || orch.load(&id)).await?;
    Ok(Json(record).into_response())
}

async fn image(State(state): State<AppState>, Path((id, slot)): Path<(String, String)>) -> ApiResult<Response> {
    let slot = match slot.as_str() {
        "initial" => ImageSlot::Initial,
        "mask" => ImageSlot::Mask,
        "inpainted" => ImageSlot::Inpainted,
        other => return Err(ApiError::not_found(format!("unknown image slot {other:?}"))),
    };
    let orch = state.orchestrator.clone();
    let png = blocking(move || orch.image_png(&id, slot)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn get_job(State(state): State<AppState>, Path(job_id): Path<String>) -> ApiResult<Json<JobHandle>> {
    let id = Uuid::parse_str(&job_id).map_err(|_| ApiError::not_found(format!("job {job_id} not found")))?;
    state.jobs.get(id).map(Json).ok_or_else(|| ApiError::not_found(format!("job {job_id} not found")))
}

async fn healthz(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let orch = state.orchestrator.clone();
    let backends = blocking(move || Ok(orch.backends().probe_all())).await?;
    let status = if backends.iter().all(|b| b.reachable) { "ok" } else { "degraded" };
    Ok(Json(json!({ "status": status, "backends": backends })))
}

/// Checks legality, takes the lease and starts the job.
async fn submit(state: &AppState, id: String, request: StageRequest) -> ApiResult<Response> {
    let stage = request.stage();
    let orch = state.orchestrator.clone();
    let sid = id.clone();
    let lease = blocking(move || orch.begin(&sid, stage)).await?;
    let job = state.jobs.create(&id, stage);
    let (orch, jobs, job_id) = (state.orchestrator.clone(), state.jobs.clone(), job.job_id);
    let worker = tokio::task::spawn_blocking(move || {
        jobs.mark_running(job_id);
        let outcome = orch.run_stage(&lease, request);
        // release before publishing so a client that sees `done` can go on
        drop(lease);
        if let Err(e) = &outcome {
            tracing::warn!(%job_id, %stage, error = %e, "stage failed");
        }
        jobs.finish(job_id, outcome.map_err(ApiError::from));
    });
    let jobs = state.jobs.clone();
    tokio::spawn(async move {
        if let Err(e) = worker.await {
            tracing::error!(%job_id, error = %e, "stage worker panicked");
            let err = ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", "stage worker panicked");
            jobs.finish(job_id, Err(ApiError { stage: Some(stage), ..err }));
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn generate(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    submit(&state, id, StageRequest::Generate).await
}

async fn inpaint(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    submit(&state, id, StageRequest::Inpaint).await
}

async fn score(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    submit(&state, id, StageRequest::Score).await
}

async fn restart(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    submit(&state, id, StageRequest::Restart).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RefineBody {
    #[serde(default)]
    user_edit: Option<String>,
}

async fn refine(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let body: RefineBody = if body.iter().all(u8::is_ascii_whitespace) {
        RefineBody { user_edit: None }
    } else {
        parse_json(&body)?
    };
    if body.user_edit.as_deref().is_some_and(|e| e.trim().is_empty()) {
        return Err(ApiError::validation("user_edit is empty"));
    }
    submit(&state, id, StageRequest::Refine { user_edit: body.user_edit }).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedBody {
    seed: MaskSeed,
}

async fn read_mask_upload(state: &AppState, request: Request) -> ApiResult<BinaryMask> {
    let mut multipart =
        Multipart::from_request(request, state).await.map_err(|e| ApiError::validation(e.body_text()))?;
    while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::validation(e.body_text()))? {
        if field.name() == Some("mask") {
            let bytes = field.bytes().await.map_err(|e| ApiError::validation(e.body_text()))?;
            return codec::decode_mask_png(&bytes).map_err(|e| ApiError::validation(format!("mask upload: {e}")));
        }
    }
    Err(ApiError::validation("multipart body has no `mask` field"))
}

async fn mask(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap, request: Request) -> ApiResult<Response> {
    let multipart = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let input = if multipart {
        MaskInput::Painted(read_mask_upload(&state, request).await?)
    } else {
        let body = Bytes::from_request(request, &state).await.map_err(|e| ApiError::validation(e.body_text()))?;
        let SeedBody { seed } = parse_json(&body)?;
        MaskInput::Seed(seed)
    };
    // check the payload against the session before accepting the job
    let orch = state.orchestrator.clone();
    let sid = id.clone();
    let record = blocking(move || orch.load(&sid)).await?;
    let dims = (record.image_size.width, record.image_size.height);
    match &input {
        MaskInput::Seed(seed) => seed.validate(dims).map_err(|e| ApiError::validation(e.to_string()))?,
        MaskInput::Painted(m) if m.dims() != dims => {
            return Err(ApiError::validation(format!(
                "mask is {}x{} but the session image is {}x{}",
                m.width(),
                m.height(),
                dims.0,
                dims.1
            )))
        }
        MaskInput::Painted(_) => {}
    }
    submit(&state, id, StageRequest::Mask(input)).await
}
