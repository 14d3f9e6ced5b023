//! JSON-over-HTTP front end for [`SessionManager`].

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use super::manager::{CreateRequest, CreateResponse, ResponseRequest, ResultView, SessionManager, StatusView};
use super::session::ResponseOutcome;
use crate::error::Error;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self(Error::Config(e.body_text()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Protocol(_) => (StatusCode::CONFLICT, "protocol"),
            Error::Config(_) | Error::Checkpoint(_) | Error::Domain(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        (status, Json(json!({ "error": self.0.to_string(), "kind": kind }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(status))
        .route("/sessions/{id}/response", post(respond))
        .route("/sessions/{id}/result", get(result))
        .with_state(manager)
}

async fn create(
    State(m): State<Arc<SessionManager>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let Json(req) = body?;
    Ok((StatusCode::CREATED, Json(m.create(req)?)))
}

async fn respond(
    State(m): State<Arc<SessionManager>>,
    Path(id): Path<String>,
    body: Result<Json<ResponseRequest>, JsonRejection>,
) -> ApiResult<ResponseOutcome> {
    let Json(req) = body?;
    Ok(Json(m.submit(&id, req)?))
}

async fn status(State(m): State<Arc<SessionManager>>, Path(id): Path<String>) -> ApiResult<StatusView> {
    Ok(Json(m.status(&id)?))
}

async fn result(State(m): State<Arc<SessionManager>>, Path(id): Path<String>) -> ApiResult<ResultView> {
    Ok(Json(m.result(&id)?))
}

/// Serves until the process is stopped.
pub async fn serve(manager: Arc<SessionManager>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(manager)).await
}
