//! HTTP API over a [`SessionStore`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use distill::session::{domain_map, DomainInfo, DomainMap, PhasePayload};
use distill::{Error, Session, SessionExport, SessionStore};
use serde::{Deserialize, Serialize};

/// Error body: a machine-readable kind, a message, and the offending trace
/// positions when there are any.
#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    pub step_indices: Vec<usize>,
}

#[derive(Debug)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::UnknownSession(_) | Error::UnknownDomain(_) => StatusCode::NOT_FOUND,
        Error::PhaseOrder { .. } => StatusCode::CONFLICT,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Budget { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let body = ErrorBody {
            error: self.0.kind().to_string(),
            message: self.0.to_string(),
            step_indices: self.0.step_indices(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub domain: String,
}

/// Runs blocking store work off the async executor.
async fn blocking<T, F>(store: Arc<SessionStore>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&SessionStore) -> distill::Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&store)).await {
        Ok(result) => Ok(Json(result?)),
        Err(join) => Err(ApiError(Error::Io(std::io::Error::other(join.to_string())))),
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(Error::InvalidPayload(e.to_string())))
}

async fn create(State(store): State<Arc<SessionStore>>, body: Bytes) -> Result<(StatusCode, Json<Session>), ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let session = blocking(store, move |s| s.create(&req.domain)).await?;
    Ok((StatusCode::CREATED, session))
}

async fn fetch(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<Session> {
    blocking(store, move |s| s.get(&id)).await
}

async fn submit(
    State(store): State<Arc<SessionStore>>,
    Path((id, phase)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Session> {
    let phase: u8 = phase
        .parse()
        .map_err(|_| ApiError(Error::InvalidPayload(format!("no phase {phase}"))))?;
    let payload = PhasePayload::from_json(phase, parse_body(&body)?)?;
    blocking(store, move |s| s.submit(&id, payload)).await
}

async fn export(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<SessionExport> {
    blocking(store, move |s| s.export(&id)).await
}

async fn domains(State(store): State<Arc<SessionStore>>) -> Json<Vec<DomainInfo>> {
    Json(store.domains())
}

async fn map(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> ApiResult<DomainMap> {
    Ok(Json(domain_map(store.domain(&id)?)))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(fetch))
        .route("/sessions/{id}/phases/{phase}", post(submit))
        .route("/sessions/{id}/export", get(export))
        .route("/domains", get(domains))
        .route("/domains/{id}/map", get(map))
        .with_state(store)
}
