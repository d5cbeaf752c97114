//! Routes and the JSON error envelope `{code, message, field?}`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ndvi_core::ingest::ExportKind;
use ndvi_core::pipeline::{AnalysisRequest, AnalyzeError, Analyzer};
use ndvi_core::sensor::{registry, ValidationReport};
use ndvi_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

pub type AppState = Arc<Analyzer>;

pub fn router(analyzer: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/sensors", get(sensors))
        .route("/validate", post(validate))
        .route("/analyze", post(analyze))
        .route("/datasets", get(datasets))
        .route("/datasets/{dataset}/children", get(children))
        .route("/export/{analysis_id}/{kind}", get(export))
        .route("/cache/stats", get(cache_stats))
        .route("/spec", get(|| async { Json(crate::api_description()) }))
        .with_state(analyzer)
}

/// Error response in the shared envelope.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    code: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    violations: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hint: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            field: None,
            violations: None,
            hint: None,
        }
    }

    fn field(mut self, f: &str) -> Self {
        self.field = Some(f.to_string());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

fn parse_request(body: &Bytes) -> Result<AnalysisRequest, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "MALFORMED_REQUEST", e.to_string()))
}

/// Status and code for an engine error raised while resolving the ROI or
/// running the pipeline.
fn engine_error(e: &Error) -> (StatusCode, &'static str) {
    match e {
        Error::NoSuchUnit(_) => (StatusCode::NOT_FOUND, "NO_SUCH_UNIT"),
        Error::DegenerateGeometry(_) => (StatusCode::UNPROCESSABLE_ENTITY, "DEGENERATE_GEOMETRY"),
        Error::InvalidRing(_) => (StatusCode::UNPROCESSABLE_ENTITY, "INVALID_RING"),
        Error::CrsMismatch { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "CRS_MISMATCH"),
        Error::Manifest { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "MANIFEST_ERROR"),
        Error::Dataset(_) | Error::InvalidData(_) => {
            (StatusCode::UNPROCESSABLE_ENTITY, "INVALID_INPUT")
        }
        Error::Transport(_) => (StatusCode::BAD_GATEWAY, "UPSTREAM_TRANSPORT"),
        Error::Protocol(_) => (StatusCode::BAD_GATEWAY, "UPSTREAM_PROTOCOL"),
        Error::Io { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "SOURCE_UNREADABLE"),
        Error::GridMismatch(_) => (StatusCode::UNPROCESSABLE_ENTITY, "GRID_MISMATCH"),
        _ => (StatusCode::INTERNAL_SERVER_ERROR, "ANALYSIS_FAILED"),
    }
}

impl From<AnalyzeError> for ApiError {
    fn from(e: AnalyzeError) -> Self {
        match e {
            AnalyzeError::Invalid(report) => {
                let mut err = ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "VALIDATION_FAILED",
                    format!("{} parameter violation(s)", report.violations.len()),
                );
                err.field = report.violations.first().map(|v| {
                    serde_json::to_value(v.field)
                        .ok()
                        .and_then(|f| f.as_str().map(str::to_string))
                        .unwrap_or_default()
                });
                err.violations = Some(report);
                err
            }
            AnalyzeError::TooLarge { pixels, budget } => ApiError::new(
                StatusCode::PAYLOAD_TOO_LARGE,
                "PIXEL_BUDGET_EXCEEDED",
                format!("request needs {pixels} pixels; the pixel budget is {budget}"),
            ),
            AnalyzeError::Roi(e) => {
                let (status, code) = engine_error(&e);
                ApiError::new(status, code, e.to_string()).field("roi")
            }
            AnalyzeError::Upstream(e) => {
                let (status, code) = match engine_error(&e) {
                    (s, c) if s == StatusCode::BAD_GATEWAY => (s, c),
                    (_, c) => (StatusCode::UNPROCESSABLE_ENTITY, c),
                };
                ApiError::new(status, code, e.to_string()).field("source")
            }
            AnalyzeError::Failed(e) => {
                let (status, code) = engine_error(&e);
                ApiError::new(status, code, e.to_string())
            }
        }
    }
}

async fn sensors() -> Json<Value> {
    Json(json!({ "sensors": registry() }))
}

async fn validate(
    State(a): State<AppState>,
    body: Bytes,
) -> Result<Json<ValidationReport>, ApiError> {
    let req = parse_request(&body)?;
    Ok(Json(a.validate(&req)))
}

async fn analyze(State(a): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req = parse_request(&body)?;
    let outcome = tokio::task::spawn_blocking(move || a.analyze(&req))
        .await
        .map_err(|e| {
            ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "ANALYSIS_FAILED",
                e.to_string(),
            )
        })??;
    Ok(Json(outcome).into_response())
}

async fn datasets(State(a): State<AppState>) -> Json<Value> {
    let list: Vec<Value> = a
        .datasets()
        .ids()
        .map(|(id, kind)| json!({"id": id, "kind": kind}))
        .collect();
    Json(json!({ "datasets": list }))
}

async fn children(
    State(a): State<AppState>,
    Path(dataset): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let path: Vec<&str> = q
        .get("path")
        .map(|p| p.split('/').filter(|s| !s.is_empty()).collect())
        .unwrap_or_default();
    let names = a.datasets().children(&dataset, &path).map_err(|e| {
        let (status, code) = engine_error(&e);
        ApiError::new(status, code, e.to_string()).field("path")
    })?;
    Ok(Json(
        json!({ "dataset": dataset, "path": path, "children": names }),
    ))
}

async fn export(
    State(a): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let kind: ExportKind = kind.parse().map_err(|e: Error| {
        ApiError::new(StatusCode::NOT_FOUND, "NO_SUCH_EXPORT", e.to_string())
    })?;
    let not_found = || {
        let mut e = ApiError::new(
            StatusCode::NOT_FOUND,
            "NO_SUCH_EXPORT",
            format!("no {kind} export for analysis {id}"),
        );
        e.hint = Some(
            "exports expire; re-run POST /analyze with the same request to regenerate them".into(),
        );
        e
    };
    let path = a.exports().get(&id, kind).ok_or_else(not_found)?;
    let bytes = tokio::fs::read(&path).await.map_err(|_| not_found())?;
    let name = kind.file_name(&id);
    Ok((
        [
            (header::CONTENT_TYPE, "image/tiff".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{name}\""),
            ),
        ],
        Body::from(bytes),
    )
        .into_response())
}

async fn cache_stats(State(a): State<AppState>) -> Json<Value> {
    Json(json!({ "composite_cache": a.cache_stats() }))
}
