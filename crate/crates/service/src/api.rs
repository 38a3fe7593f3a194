//! JSON over HTTP. Pipeline work runs on the blocking pool.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::error::{PipelineError, Stage};
use crate::service::{DensityFormat, PlanRequest, Service};

pub struct ApiError(PipelineError);

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        ApiError(e)
    }
}

fn status_of(e: &PipelineError) -> StatusCode {
    match (e.stage, e.code.as_str()) {
        (_, "not_found") => StatusCode::NOT_FOUND,
        (_, "already_placed") => StatusCode::CONFLICT,
        (_, "bad_request" | "bad_format" | "invalid_config" | "invalid_scene" | "unknown_receptacle") => {
            StatusCode::BAD_REQUEST
        }
        (Stage::Reasoning, "remote" | "llm_unavailable") => StatusCode::BAD_GATEWAY,
        (Stage::Reasoning, "no_receptacles" | "parse") => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_of(&self.0), Json(self.0)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad_request(stage: Stage, e: impl std::fmt::Display) -> ApiError {
    ApiError(PipelineError::new(stage, "bad_request", e.to_string()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, PipelineError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(PipelineError::new(Stage::Store, "internal", e.to_string())))?
        .map_err(ApiError)
}

async fn healthz() -> impl IntoResponse {
    Json(json!({"status": "ok"}))
}

async fn create_scene(State(svc): State<Arc<Service>>, body: String) -> ApiResult<impl IntoResponse> {
    let id = blocking(move || svc.add_scene(&body)).await?;
    Ok((StatusCode::CREATED, Json(json!({"scene_id": id}))))
}

async fn get_scene(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.scene_view(&id)?))
}

async fn plan(State(svc): State<Arc<Service>>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: PlanRequest = serde_json::from_slice(&body).map_err(|e| bad_request(Stage::Ingest, e))?;
    let result = blocking(move || svc.plan_scene(&id, &req)).await?;
    Ok(Json(result))
}

#[derive(Deserialize)]
struct DensityQuery {
    format: Option<String>,
}

async fn density(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(q): Query<DensityQuery>,
) -> ApiResult<impl IntoResponse> {
    let format: DensityFormat = q.format.as_deref().unwrap_or("binary").parse()?;
    let bytes = blocking(move || svc.density(&id, format)).await?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], bytes))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectRequest {
    rank: usize,
}

async fn select(State(svc): State<Arc<Service>>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: SelectRequest = serde_json::from_slice(&body).map_err(|e| bad_request(Stage::Selection, e))?;
    let outcome = blocking(move || svc.execute_selection(&id, req.rank)).await?;
    Ok(Json(outcome))
}

async fn get_run(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.store.run(&id)?))
}

async fn fallback() -> ApiError {
    ApiError(PipelineError::not_found(Stage::Ingest, "no such endpoint"))
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/scenes", post(create_scene))
        .route("/scenes/{id}", get(get_scene))
        .route("/scenes/{id}/plan", post(plan))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/density", get(density))
        .route("/runs/{id}/select", post(select))
        .fallback(fallback)
        .with_state(svc)
}

/// Serves until the listener fails or `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    svc: Arc<Service>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(svc)).with_graceful_shutdown(shutdown).await
}
