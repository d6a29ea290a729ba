use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use fitmap_core::custom::{CrosswalkError, RegistryError, UploadError, UploadErrorKind};
use fitmap_core::geo::GeoError;
use fitmap_core::ingest::IngestError;
use serde_json::json;
use thiserror::Error;

/// Client-visible failure: status, stable machine code and a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn missing_param(name: &str) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "MissingParam", format!("missing required parameter {name:?}"))
    }

    pub fn bad_enum(name: &str, value: &str, allowed: &str) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "BadEnum", format!("{name}={value:?} is not one of {allowed}"))
    }

    pub fn bad_param(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "BadParam", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<GeoError> for ApiError {
    fn from(e: GeoError) -> Self {
        let msg = e.to_string();
        match e {
            GeoError::ZoomOutOfRange { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ZoomOutOfRange", msg),
            GeoError::UnknownCounty(_) => ApiError::new(StatusCode::BAD_REQUEST, "UnknownCounty", msg),
            GeoError::BadBbox(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "BadBbox", msg),
            GeoError::NotACluster(_) => ApiError::not_found(msg),
            GeoError::OutOfRange(_) | GeoError::BadOptions(_) => ApiError::internal(msg),
        }
    }
}

impl From<UploadError> for ApiError {
    fn from(e: UploadError) -> Self {
        let status = match e.kind {
            UploadErrorKind::TooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            UploadErrorKind::DuplicateLayerName => StatusCode::CONFLICT,
            UploadErrorKind::BadExtension
            | UploadErrorKind::MissingDataColumn
            | UploadErrorKind::MissingCodeColumn
            | UploadErrorKind::EmptyFile => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let code = match e.kind {
            UploadErrorKind::TooLarge => "TooLarge",
            UploadErrorKind::BadExtension => "BadExtension",
            UploadErrorKind::MissingDataColumn => "MissingDataColumn",
            UploadErrorKind::MissingCodeColumn => "MissingCodeColumn",
            UploadErrorKind::EmptyFile => "EmptyFile",
            UploadErrorKind::DuplicateLayerName => "DuplicateLayerName",
        };
        ApiError::new(status, code, e.detail)
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        let msg = e.to_string();
        match e {
            RegistryError::DuplicateLayerName(_) => ApiError::new(StatusCode::CONFLICT, "DuplicateLayerName", msg),
            RegistryError::NotFound(_) => ApiError::not_found(msg),
            RegistryError::Io { .. } | RegistryError::Corrupt(_) => ApiError::internal(msg),
        }
    }
}

/// Reasons the server refuses to start.
#[derive(Debug, Error)]
pub enum StartupError {
    #[error("no snapshot at {0}")]
    SnapshotMissing(PathBuf),
    #[error(transparent)]
    Snapshot(IngestError),
    #[error("layer store: {0}")]
    Registry(#[from] RegistryError),
    #[error("crosswalk {path}: {source}")]
    Crosswalk { path: PathBuf, source: CrosswalkError },
    #[error("port {0} is already in use")]
    PortBusy(u16),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<IngestError> for StartupError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::SnapshotMissing(p) => StartupError::SnapshotMissing(p),
            other => StartupError::Snapshot(other),
        }
    }
}
