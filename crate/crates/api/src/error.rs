use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use casemix_core::Error;
use serde::Serialize;
use serde_json::Value;

/// Error payload: `{"error": kind, "message": ..., "path": ...}` plus extras.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
    pub path: Option<String>,
    pub extra: Option<Value>,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
            path: None,
            extra: None,
        }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn busy(id: &str) -> Self {
        ApiError::new(
            StatusCode::CONFLICT,
            "solve_in_progress",
            format!("session {id} already has a solve running"),
        )
    }

    pub fn bad_request(path: &str, message: impl Into<String>) -> Self {
        ApiError {
            path: Some(path.to_string()),
            ..ApiError::new(StatusCode::BAD_REQUEST, "validation", message)
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation { path, message } => ApiError::bad_request(&path, message),
            Error::Utility(u) => ApiError::new(StatusCode::BAD_REQUEST, "validation", u.to_string()),
            Error::Json { source, .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, "validation", source.to_string())
            }
            Error::Infeasible(msg) => ApiError {
                extra: Some(serde_json::json!({ "zeroed": false })),
                ..ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "infeasible",
                    format!("{msg}: no feasible solution"),
                )
            },
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = serde_json::to_value(Body {
            error: self.kind,
            message: &self.message,
            path: self.path.as_deref(),
        })
        .expect("error body serializes");
        if let (Value::Object(b), Some(Value::Object(extra))) = (&mut body, self.extra) {
            b.extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}
