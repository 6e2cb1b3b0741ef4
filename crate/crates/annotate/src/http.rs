//! JSON over HTTP.
//!
//! | route | |
//! |---|---|
//! | `GET /api/batch?worker_id=W` | leased tasks; 403 `{"reason":"banned"}` for banned workers |
//! | `POST /api/responses` | `{worker_id, responses: [{task_id, choice, shown_left?}]}` |
//! | `GET /api/ranking` | current estimate |
//! | `GET /api/status` | `{run, comparisons_total, queue_depth, open_partitions, ...}` |
//! | `POST /api/admin/run` | `{runs}`, requires the `x-admin-token` header |

use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::controller::spawn_controller;
use crate::error::ServiceError;
use crate::service::{ResponseItem, Service};

pub const ADMIN_TOKEN_HEADER: &str = "x-admin-token";

#[derive(Clone)]
struct AppState {
    service: Arc<Service>,
    admin_token: Option<String>,
}

#[derive(Deserialize)]
struct BatchQuery {
    worker_id: String,
}

#[derive(Deserialize)]
struct ResponsesBody {
    worker_id: String,
    responses: Vec<ResponseItem>,
}

#[derive(Deserialize)]
struct RunBody {
    runs: u32,
}

struct ApiError(ServiceError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self.0 {
            ServiceError::Banned(_) => (StatusCode::FORBIDDEN, Json(json!({ "reason": "banned" }))).into_response(),
            ServiceError::Config(m) => (StatusCode::BAD_REQUEST, Json(json!({ "error": m }))).into_response(),
            ServiceError::Core(e) => (StatusCode::BAD_REQUEST, Json(json!({ "error": e.to_string() }))).into_response(),
            ServiceError::Shutdown => {
                (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "error": "shutting down" }))).into_response()
            }
            e => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": e.to_string() }))).into_response(),
        }
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(ServiceError::Io(std::io::Error::other(e))))?
        .map_err(ApiError)
}

async fn batch(State(app): State<AppState>, Query(q): Query<BatchQuery>) -> Result<Response, ApiError> {
    let service = app.service.clone();
    let tasks = blocking(move || service.serve_batch(&q.worker_id)).await?;
    Ok(Json(tasks).into_response())
}

async fn responses(State(app): State<AppState>, Json(body): Json<ResponsesBody>) -> Result<Response, ApiError> {
    let service = app.service.clone();
    let acks = blocking(move || service.record_responses(&body.worker_id, &body.responses)).await?;
    Ok(Json(json!({ "acks": acks })).into_response())
}

async fn ranking(State(app): State<AppState>) -> Result<Response, ApiError> {
    let service = app.service.clone();
    let report = blocking(move || service.ranking()).await?;
    Ok(Json(report).into_response())
}

async fn status(State(app): State<AppState>) -> Response {
    Json(app.service.status()).into_response()
}

async fn admin_run(State(app): State<AppState>, headers: HeaderMap, Json(body): Json<RunBody>) -> Result<Response, ApiError> {
    let supplied = headers.get(ADMIN_TOKEN_HEADER).and_then(|v| v.to_str().ok());
    match (&app.admin_token, supplied) {
        (Some(expected), Some(given)) if expected == given => {}
        _ => return Ok((StatusCode::UNAUTHORIZED, Json(json!({ "error": "admin token required" }))).into_response()),
    }
    let service = app.service.clone();
    let total = blocking(move || {
        let total = service.request_runs(body.runs)?;
        spawn_controller(&service);
        Ok(total)
    })
    .await?;
    Ok(Json(json!({ "runs_requested": total })).into_response())
}

/// Admin routes answer 401 when `admin_token` is `None`.
pub fn router(service: Arc<Service>, admin_token: Option<String>) -> Router {
    Router::new()
        .route("/api/batch", get(batch))
        .route("/api/responses", post(responses))
        .route("/api/ranking", get(ranking))
        .route("/api/status", get(status))
        .route("/api/admin/run", post(admin_run))
        .with_state(AppState { service, admin_token })
}
