use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use streamflow_core::model::ModelError;
use streamflow_core::platform::PlatformError;
use streamflow_core::runtime::RuntimeError;
use streamflow_core::store::StoreError;

/// A failed request, rendered as `{"error": code, "message": text}`.
#[derive(Debug)]
pub enum ApiError {
    Platform(PlatformError),
    /// A query string the store never sees, e.g. a non-numeric bound.
    BadQuery(String),
}

impl<E: Into<PlatformError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError::Platform(e.into())
    }
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Platform(e) => e.code(),
            ApiError::BadQuery(_) => "BadRange",
        }
    }

    pub fn message(&self) -> String {
        match self {
            ApiError::Platform(e) => e.to_string(),
            ApiError::BadQuery(m) => m.clone(),
        }
    }

    pub fn status(&self) -> StatusCode {
        let ApiError::Platform(e) = self else {
            return StatusCode::BAD_REQUEST;
        };
        match e {
            PlatformError::Model(_) => StatusCode::BAD_REQUEST,
            PlatformError::NotFound(_) => StatusCode::NOT_FOUND,
            PlatformError::Runtime(RuntimeError::CompositeStream(_)) => StatusCode::CONFLICT,
            PlatformError::Runtime(RuntimeError::QueueFull | RuntimeError::Stopped) => StatusCode::SERVICE_UNAVAILABLE,
            PlatformError::Runtime(_) => StatusCode::INTERNAL_SERVER_ERROR,
            PlatformError::Store(StoreError::BadRange { .. }) => StatusCode::BAD_REQUEST,
            PlatformError::Store(StoreError::Conflict(_)) => StatusCode::CONFLICT,
            PlatformError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub(crate) fn malformed_descriptor(e: impl ToString) -> Self {
        ModelError::MalformedDescriptor(e.to_string()).into()
    }

    pub(crate) fn malformed_update(e: impl ToString) -> Self {
        ModelError::MalformedUpdate(e.to_string()).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        let (code, message) = (self.code(), self.message());
        if status.is_server_error() {
            log::warn!("{code}: {message}");
        }
        (status, Json(json!({"error": code, "message": message}))).into_response()
    }
}
