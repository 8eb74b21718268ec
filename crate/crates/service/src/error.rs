use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use faithkit_core::judgments::JudgmentError;
use faithkit_core::Mode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("project {0} already exists")]
    ProjectExists(String),
    #[error("invalid project: {0}")]
    InvalidProject(String),
    #[error("slot {0} is not registered to this project")]
    UnknownSlot(usize),
    #[error("missing or wrong token for slot {0}")]
    Forbidden(usize),
    #[error("unassigned: {0}")]
    Unassigned(String),
    #[error("project collects {0:?} judgments")]
    WrongMode(Mode),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Judgment(#[from] JudgmentError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// JSON error body: a stable machine-readable code plus a message.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::UnknownProject(_) => "unknown_project",
            ApiError::ProjectExists(_) => "project_exists",
            ApiError::InvalidProject(_) => "invalid_project",
            ApiError::UnknownSlot(_) => "unknown_slot",
            ApiError::Forbidden(_) => "forbidden",
            ApiError::Unassigned(_) => "unassigned_unit",
            ApiError::WrongMode(_) => "wrong_mode",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Judgment(JudgmentError::Duplicate(_)) => "duplicate",
            ApiError::Judgment(JudgmentError::Supersedes { .. }) => "bad_supersedes",
            ApiError::Judgment(JudgmentError::Label(_)) => "invalid_label",
            ApiError::Judgment(JudgmentError::Rating { .. }) => "invalid_rating",
            ApiError::Judgment(_) | ApiError::Io(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::UnknownProject(_) | ApiError::UnknownSlot(_) => StatusCode::NOT_FOUND,
            ApiError::ProjectExists(_) => StatusCode::CONFLICT,
            ApiError::Forbidden(_) => StatusCode::FORBIDDEN,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::InvalidProject(_) | ApiError::Unassigned(_) | ApiError::WrongMode(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ApiError::Judgment(JudgmentError::Duplicate(_) | JudgmentError::Supersedes { .. }) => StatusCode::CONFLICT,
            ApiError::Judgment(JudgmentError::Label(_) | JudgmentError::Rating { .. }) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ApiError::Judgment(_) | ApiError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!("{self}");
        }
        let body = ErrorBody {
            error: self.code().to_string(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
