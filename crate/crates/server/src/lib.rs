//! HTTP front end for the task service.
//!
//! Routes:
//! - `POST /api/workers` `{"worker_id"}` registers a worker.
//! - `GET /api/tasks/next?worker_id=&kind=rewrite|rate` returns a task or
//!   `{"status":"empty"}`.
//! - `POST /api/submissions` takes a submission; `submitted_at` is filled in
//!   when absent.
//! - `GET /api/progress` returns counters.
//! - `GET /api/export?kind=ratings|rewrites` returns JSONL.
//!
//! Everything else is served from the optional static directory.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use splitbench::service::{ExportKind, Payload, ServiceError, Submission, TaskKind, TaskService};
use tower_http::services::ServeDir;

pub type Shared = Arc<Mutex<TaskService>>;

struct ApiError(StatusCode, String);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match e {
            ServiceError::UnknownWorker(_) | ServiceError::UnknownTask(_) => StatusCode::NOT_FOUND,
            ServiceError::NotAssigned { .. } | ServiceError::DoubleSubmission { .. } => StatusCode::CONFLICT,
            ServiceError::Log(_) | ServiceError::Replay { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn lock(shared: &Shared) -> std::sync::MutexGuard<'_, TaskService> {
    shared.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

#[derive(Deserialize)]
struct WorkerBody {
    worker_id: String,
}

async fn register(State(shared): State<Shared>, Json(body): Json<WorkerBody>) -> Result<Response, ApiError> {
    lock(&shared).register(&body.worker_id)?;
    Ok(Json(json!({ "worker_id": body.worker_id })).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    worker_id: String,
    kind: String,
}

async fn next_task(State(shared): State<Shared>, Query(q): Query<NextQuery>) -> Result<Response, ApiError> {
    let kind: TaskKind = q.kind.parse().map_err(|e| ApiError(StatusCode::BAD_REQUEST, e))?;
    let task = lock(&shared).next_task(&q.worker_id, kind)?;
    Ok(match task {
        Some(task) => Json(task).into_response(),
        None => Json(json!({ "status": "empty" })).into_response(),
    })
}

#[derive(Deserialize)]
struct SubmissionBody {
    task_id: String,
    worker_id: String,
    payload: Payload,
    submitted_at: Option<String>,
}

async fn submit(State(shared): State<Shared>, Json(body): Json<SubmissionBody>) -> Result<Response, ApiError> {
    let submission = Submission {
        task_id: body.task_id,
        worker_id: body.worker_id,
        payload: body.payload,
        submitted_at: body
            .submitted_at
            .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
    };
    let ack = lock(&shared).submit(submission)?;
    log::info!("accepted {} from {}", ack.task_id, ack.worker_id);
    Ok(Json(ack).into_response())
}

async fn progress(State(shared): State<Shared>) -> Response {
    Json(lock(&shared).progress()).into_response()
}

#[derive(Deserialize)]
struct ExportQuery {
    kind: String,
}

async fn export(State(shared): State<Shared>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let kind: ExportKind = q.kind.parse().map_err(|e| ApiError(StatusCode::BAD_REQUEST, e))?;
    let body = lock(&shared).export(kind);
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

pub fn router(shared: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/workers", post(register))
        .route("/api/tasks/next", get(next_task))
        .route("/api/submissions", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .with_state(shared);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, shared: Shared, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(shared, static_dir)).await
}
