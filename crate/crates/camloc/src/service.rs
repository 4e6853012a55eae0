//! Stateless HTTP service for live annotation feedback.
//!
//! Every handler is a pure function of its request body. Errors are
//! `{"code", "message", "field_path"}` with 400 for malformed requests and
//! 422 when the estimators cannot produce a result.

use axum::body::Bytes;
use axum::extract::Path;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::app::{AbsoluteRequest, RelativeRequest};
use crate::error::{AppError, AppResult};
use crate::measure::{self, SensorKind};
use crate::result::{CameraDoc, ResultDoc};
use crate::schema::{parse_doc, Versioned};
use crate::vp::{vanishing_points, VpRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub field_path: Option<String>,
}

impl From<&AppError> for ErrorBody {
    fn from(e: &AppError) -> Self {
        Self {
            code: e.code().into(),
            message: e.to_string(),
            field_path: e.field_path().map(String::from),
        }
    }
}

pub fn status(e: &AppError) -> StatusCode {
    match e {
        AppError::Schema { .. } | AppError::Usage { .. } => StatusCode::BAD_REQUEST,
        AppError::Invariant { .. } | AppError::Estimation(_) | AppError::NoCandidates(_) => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        AppError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        AppError::InFile { source, .. } => status(source),
    }
}

fn respond<T: Serialize>(r: AppResult<T>) -> Response {
    match r {
        Ok(v) => Json(v).into_response(),
        Err(e) => (status(&e), Json(ErrorBody::from(&e))).into_response(),
    }
}

/// Camera plus a points document of the sensor's kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorRequest {
    pub version: u32,
    pub camera: CameraDoc,
    pub points: serde_json::Value,
}

impl Versioned for SensorRequest {
    fn version(&self) -> u32 {
        self.version
    }
}

fn with_prefix(e: AppError, prefix: &str) -> AppError {
    match e {
        AppError::Schema { path, message } => AppError::Schema {
            path: if path == "." { prefix.into() } else { format!("{prefix}.{path}") },
            message,
        },
        e => e,
    }
}

pub fn sensor(kind: &str, body: &[u8]) -> AppResult<measure::MeasurementDoc> {
    let kind = SensorKind::parse(kind).ok_or_else(|| AppError::Usage {
        message: format!("unknown sensor `{kind}`, expected scale, height or speed"),
        field_path: None,
    })?;
    let req: SensorRequest = parse_doc(body)?;
    let (k, pose) = req.camera.to_core("camera")?;
    let points = serde_json::to_vec(&req.points).expect("value serializes");
    measure::measure(kind, &k, &pose, &points).map_err(|e| with_prefix(e, "points"))
}

async fn health() -> Response {
    Json(json!({"status": "ok", "version": env!("CARGO_PKG_VERSION")})).into_response()
}

async fn vanishing(body: Bytes) -> Response {
    respond(parse_doc::<VpRequest>(&body).and_then(|r| vanishing_points(&r)))
}

async fn relative(body: Bytes) -> Response {
    respond(
        parse_doc::<RelativeRequest>(&body)
            .and_then(|r| r.run())
            .map(|r| ResultDoc::from(&r)),
    )
}

async fn absolute(body: Bytes) -> Response {
    respond(
        parse_doc::<AbsoluteRequest>(&body)
            .and_then(|r| r.run())
            .map(|r| ResultDoc::from(&r)),
    )
}

async fn sensors(Path(kind): Path<String>, body: Bytes) -> Response {
    respond(sensor(&kind, &body))
}

pub fn router() -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/vanishing-points", post(vanishing))
        .route("/api/v1/relative", post(relative))
        .route("/api/v1/absolute", post(absolute))
        .route("/api/v1/sensors/{kind}", post(sensors))
}

/// Serves until the process is stopped.
pub async fn serve(host: &str, port: u16) -> AppResult<()> {
    let addr = format!("{host}:{port}");
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| AppError::io(&addr, e))?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, router()).await.map_err(|e| AppError::io(&addr, e))
}
