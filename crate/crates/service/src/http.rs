//! HTTP+JSON front end over [`LivenessService`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;
use uuid::Uuid;

use crate::service::{CreateSession, LivenessService, ServiceError, SubmitFrames, SubmitTrajectory};

/// Frame uploads carry whole PGM sequences.
const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Validation(_) => (StatusCode::BAD_REQUEST, "validation"),
            ServiceError::Generation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "generation_failed"),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ServiceError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "store"),
            ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        (status, Json(json!({ "error": kind, "message": self.0.to_string() }))).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(ServiceError::Validation(format!("malformed body: {e}"))))
}

fn parse_id(raw: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(raw).map_err(|_| ApiError(ServiceError::Validation(format!("malformed session id {raw:?}"))))
}

/// Runs engine work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(ServiceError::Internal(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

async fn create(State(svc): State<Arc<LivenessService>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        parse(&body)?
    };
    let session = blocking(move || svc.create_session(&req)).await?;
    Ok((StatusCode::CREATED, Json(session)))
}

async fn fetch(State(svc): State<Arc<LivenessService>>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let id = parse_id(&id)?;
    Ok(Json(blocking(move || svc.get_session(id)).await?))
}

async fn trajectory(
    State(svc): State<Arc<LivenessService>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<impl Serialize>, ApiError> {
    let id = parse_id(&id)?;
    let req: SubmitTrajectory = parse(&body)?;
    Ok(Json(blocking(move || svc.submit_trajectory(id, req)).await?))
}

async fn frames(
    State(svc): State<Arc<LivenessService>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<impl Serialize>, ApiError> {
    let id = parse_id(&id)?;
    let req: SubmitFrames = parse(&body)?;
    Ok(Json(blocking(move || svc.submit_frames(id, &req)).await?))
}

pub fn router(service: Arc<LivenessService>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(fetch))
        .route("/sessions/{id}/trajectory", post(trajectory))
        .route("/sessions/{id}/frames", post(frames))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(service)
}
