//! HTTP+JSON routes over [`Store`].
//!
//! Every route except `GET /config/labels` and `GET /health` needs an
//! `Authorization: Bearer <token>` header. Errors come back as
//! `{"error": <kind>, "message": <text>}` with extra fields for validation
//! reports and unfinalized task lists.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use aloe_core::data::{Alignment, Span, TargetObserverPair};
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::{ServeDir, ServeFile};

use crate::model::*;
use crate::palette::Palette;
use crate::store::{Store, Thread};

pub struct AppState {
    pub store: Store,
    pub palette: Palette,
}

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        let (status, body) = match self.0 {
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, json!({"error": "unauthorized", "message": message})),
            ServiceError::Forbidden(_) => (StatusCode::FORBIDDEN, json!({"error": "forbidden", "message": message})),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": message})),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, json!({"error": "conflict", "message": message})),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, json!({"error": "bad_request", "message": message})),
            ServiceError::Invalid(report) => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({"error": "invalid", "message": message, "report": report}))
            }
            ServiceError::Unfinalized(tasks) => {
                (StatusCode::CONFLICT, json!({"error": "unfinalized", "message": message, "tasks": tasks}))
            }
            ServiceError::Store(_) | ServiceError::Json(_) => {
                log::error!("{message}");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": message}))
            }
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs a store call off the async executor.
async fn blocking<T, F>(state: &Arc<AppState>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T, ServiceError> + Send + 'static,
{
    let state = Arc::clone(state);
    tokio::task::spawn_blocking(move || f(&state.store))
        .await
        .map_err(|e| ApiError(ServiceError::BadRequest(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

/// The authenticated caller.
pub struct Actor(pub Annotator);

impl FromRequestParts<Arc<AppState>> for Actor {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &Arc<AppState>) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(|t| t.trim().to_string())
            .ok_or(ApiError(ServiceError::Unauthorized))?;
        let annotator = blocking(state, move |s| s.authenticate(&token)).await?;
        Ok(Actor(annotator))
    }
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

#[derive(Deserialize)]
struct AuthorQuery {
    author: Option<String>,
}

#[derive(Deserialize)]
struct BatchQuery {
    batch: Option<i64>,
}

async fn create_annotator(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Json(req): Json<CreateAnnotator>,
) -> ApiResult<impl IntoResponse> {
    let issued = blocking(&st, move |s| s.create_annotator(&a, &req)).await?;
    Ok((StatusCode::CREATED, Json(issued)))
}

async fn add_pairs(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Json(pairs): Json<Vec<TargetObserverPair>>,
) -> ApiResult<impl IntoResponse> {
    let added = blocking(&st, move |s| s.add_pairs(&a, &pairs)).await?;
    Ok((StatusCode::CREATED, Json(json!({ "added": added }))))
}

async fn create_batches(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Json(req): Json<CreateBatch>,
) -> ApiResult<impl IntoResponse> {
    let batches = blocking(&st, move |s| s.create_batch(&a, &req)).await?;
    Ok((StatusCode::CREATED, Json(batches)))
}

async fn list_tasks(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Query(q): Query<AnnotatorQuery>,
) -> ApiResult<Json<Vec<TaskSummary>>> {
    Ok(Json(blocking(&st, move |s| s.list_tasks(&a, q.annotator.as_deref())).await?))
}

async fn get_task(State(st): State<Arc<AppState>>, Actor(a): Actor, Path(id): Path<String>) -> ApiResult<Json<AnnotationTask>> {
    Ok(Json(blocking(&st, move |s| s.get_task(&a, &id)).await?))
}

async fn submit_spans(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Path(id): Path<String>,
    Json(spans): Json<Vec<Span>>,
) -> ApiResult<impl IntoResponse> {
    let sub = blocking(&st, move |s| s.submit(&a, &id, Payload::Spans(spans))).await?;
    Ok((StatusCode::CREATED, Json(sub)))
}

async fn submit_alignments(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Path(id): Path<String>,
    Json(alignments): Json<Vec<Alignment>>,
) -> ApiResult<impl IntoResponse> {
    let sub = blocking(&st, move |s| s.submit(&a, &id, Payload::Alignments(alignments))).await?;
    Ok((StatusCode::CREATED, Json(sub)))
}

async fn submissions(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Path(id): Path<String>,
    Query(q): Query<AnnotatorQuery>,
) -> ApiResult<Json<Vec<Submission>>> {
    let who = q.annotator.unwrap_or_else(|| a.annotator_id.clone());
    Ok(Json(blocking(&st, move |s| s.submissions(&a, &id, &who)).await?))
}

async fn post_entry(
    st: Arc<AppState>,
    a: Annotator,
    id: String,
    thread: Thread,
    body: EntryText,
) -> ApiResult<impl IntoResponse> {
    let entry = blocking(&st, move |s| s.add_entry(&a, &id, thread, &body.text)).await?;
    Ok((StatusCode::CREATED, Json(entry)))
}

async fn post_note(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Path(id): Path<String>,
    Json(b): Json<EntryText>,
) -> ApiResult<impl IntoResponse> {
    post_entry(st, a, id, Thread::Notes, b).await
}

async fn post_discussion(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Path(id): Path<String>,
    Json(b): Json<EntryText>,
) -> ApiResult<impl IntoResponse> {
    post_entry(st, a, id, Thread::Discussion, b).await
}

async fn get_notes(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Path(id): Path<String>,
    Query(q): Query<AuthorQuery>,
) -> ApiResult<Json<Vec<Entry>>> {
    Ok(Json(blocking(&st, move |s| s.entries(&a, &id, Thread::Notes, q.author.as_deref())).await?))
}

async fn get_discussion(State(st): State<Arc<AppState>>, Actor(a): Actor, Path(id): Path<String>) -> ApiResult<Json<Vec<Entry>>> {
    Ok(Json(blocking(&st, move |s| s.entries(&a, &id, Thread::Discussion, None)).await?))
}

async fn review(State(st): State<Arc<AppState>>, Actor(a): Actor, Path(id): Path<String>) -> ApiResult<Json<ReviewView>> {
    Ok(Json(blocking(&st, move |s| s.review(&a, &id)).await?))
}

async fn finalize(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Path(id): Path<String>,
    Json(r): Json<Resolution>,
) -> ApiResult<Json<AdjudicationState>> {
    Ok(Json(blocking(&st, move |s| s.finalize(&a, &id, r)).await?))
}

async fn adjudication(
    State(st): State<Arc<AppState>>,
    Actor(a): Actor,
    Path(id): Path<String>,
) -> ApiResult<Json<AdjudicationState>> {
    Ok(Json(blocking(&st, move |s| s.adjudication(&a, &id)).await?))
}

async fn export(State(st): State<Arc<AppState>>, Actor(a): Actor, Query(q): Query<BatchQuery>) -> ApiResult<impl IntoResponse> {
    let body = blocking(&st, move |s| s.export(&a, q.batch)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body))
}

async fn labels(State(st): State<Arc<AppState>>) -> Json<Palette> {
    Json(st.palette.clone())
}

async fn not_found() -> ApiError {
    ApiError(ServiceError::NotFound("no such route".into()))
}

/// API routes; with `ui_dir`, other paths are served from that directory
/// (falling back to its `index.html` for client-side routes).
pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/config/labels", get(labels))
        .route("/annotators", post(create_annotator))
        .route("/pairs", post(add_pairs))
        .route("/batches", post(create_batches))
        .route("/tasks", get(list_tasks))
        .route("/tasks/{id}", get(get_task))
        .route("/tasks/{id}/spans", post(submit_spans))
        .route("/tasks/{id}/alignments", post(submit_alignments))
        .route("/tasks/{id}/submissions", get(submissions))
        .route("/tasks/{id}/notes", get(get_notes).post(post_note))
        .route("/tasks/{id}/discussion", get(get_discussion).post(post_discussion))
        .route("/tasks/{id}/review", get(review))
        .route("/tasks/{id}/finalize", get(adjudication).post(finalize))
        .route("/export", get(export))
        .with_state(state);
    match ui_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            api.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)))
        }
        None => api.fallback(not_found),
    }
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub store: PathBuf,
    pub addr: SocketAddr,
    pub palette: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    pub admin_id: String,
    /// Token for a newly created admin; generated when None.
    pub admin_token: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("label palette: {0}")]
    Palette(#[from] crate::palette::PaletteError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Opens the store, bootstraps the admin account and serves until the task
/// is cancelled. `on_ready` receives the bound address and, on first start,
/// the admin token.
pub async fn serve(config: ServerConfig, on_ready: impl FnOnce(SocketAddr, Option<IssuedToken>)) -> Result<(), ServeError> {
    let store = Store::open(&config.store)?;
    let issued = store.ensure_admin(&config.admin_id, config.admin_token.as_deref())?;
    let palette = match &config.palette {
        Some(p) => Palette::load(p)?,
        None => Palette::builtin(),
    };
    let app = router(Arc::new(AppState { store, palette }), config.ui_dir.clone());
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    on_ready(listener.local_addr()?, issued);
    axum::serve(listener, app).await?;
    Ok(())
}
