use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use storeplace::demand::DemandError;
use storeplace::eval::{EvalError, Status};
use storeplace::learners::LearnError;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum ApiError {
    #[error("data sets are still loading")]
    NotLoaded,
    #[error("unknown target {0:?}")]
    UnknownTarget(String),
    #[error("unknown job {0}")]
    UnknownJob(u64),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Invalid(String),
    #[error("no candidate locations: {}", .0.describe())]
    NoCandidates(Status),
    #[error("{0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    status: Option<&'a Status>,
}

impl ApiError {
    pub fn status_code(&self) -> StatusCode {
        match self {
            ApiError::NotLoaded => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::UnknownTarget(_) | ApiError::UnknownJob(_) => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::NoCandidates(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::NoCandidates(s) => Some(s),
            _ => None,
        };
        let body = ErrorBody {
            error: self.to_string(),
            status,
        };
        (self.status_code(), axum::Json(body)).into_response()
    }
}

impl From<DemandError> for ApiError {
    fn from(e: DemandError) -> Self {
        match e {
            DemandError::InvalidParam { .. } | DemandError::CellTooSmall(_) => ApiError::Invalid(e.to_string()),
            DemandError::UnknownTarget(t) => ApiError::UnknownTarget(t),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<LearnError> for ApiError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::InvalidHyper { .. } => ApiError::Invalid(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Demand(d) => d.into(),
            EvalError::Learn(l) => l.into(),
            EvalError::NoTraining(c) => ApiError::UnknownTarget(c),
            other => ApiError::Internal(other.to_string()),
        }
    }
}
