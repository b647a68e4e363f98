use axum::http::StatusCode;
use searchsvc_core::codec::FormatError;
use searchsvc_core::engine::EngineError;
use searchsvc_core::klm::KlmError;
use searchsvc_core::selector::SelectorError;
use searchsvc_core::visualize::VisualizeError;
use serde::Serialize;
use thiserror::Error;

use crate::store::StoreError;

/// Every failure the CLI and API report. `kind` is the stable machine name.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AppError {
    /// Malformed input from the caller.
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{what} not found: {id}")]
    NotFound { what: &'static str, id: String },
    /// The request was well formed but the operation cannot proceed.
    #[error("{message}")]
    Domain { kind: &'static str, message: String },
    /// A remote engine misbehaved.
    #[error("{message}")]
    Upstream { kind: &'static str, message: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Serialize)]
pub struct ErrorBody<'a> {
    pub error: &'a str,
    pub message: String,
}

impl AppError {
    pub fn not_found(what: &'static str, id: impl Into<String>) -> Self {
        AppError::NotFound { what, id: id.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::BadRequest(_) => "bad-request",
            AppError::Invalid(_) => "invalid-spec",
            AppError::NotFound { .. } => "not-found",
            AppError::Domain { kind, .. } | AppError::Upstream { kind, .. } => kind,
            AppError::Io(_) => "io-error",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            AppError::BadRequest(_) | AppError::Invalid(_) => StatusCode::BAD_REQUEST,
            AppError::NotFound { .. } => StatusCode::NOT_FOUND,
            AppError::Domain { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            AppError::Upstream { .. } => StatusCode::BAD_GATEWAY,
            AppError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::BadRequest(_) => 2,
            _ => 1,
        }
    }

    pub fn body(&self) -> ErrorBody<'_> {
        ErrorBody {
            error: self.kind(),
            message: self.to_string(),
        }
    }
}

impl From<EngineError> for AppError {
    fn from(e: EngineError) -> Self {
        let kind = e.name();
        match e {
            EngineError::FetchFailed { .. } => AppError::Upstream {
                kind,
                message: e.to_string(),
            },
            _ => AppError::Domain {
                kind,
                message: e.to_string(),
            },
        }
    }
}

impl From<SelectorError> for AppError {
    fn from(e: SelectorError) -> Self {
        let kind = match e {
            SelectorError::Parse { .. } => "invalid-selector",
            SelectorError::UnresolvablePath(_) => "unresolvable-path",
        };
        AppError::Domain {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<VisualizeError> for AppError {
    fn from(e: VisualizeError) -> Self {
        AppError::Domain {
            kind: e.name(),
            message: e.to_string(),
        }
    }
}

impl From<KlmError> for AppError {
    fn from(e: KlmError) -> Self {
        AppError::Domain {
            kind: e.name(),
            message: e.to_string(),
        }
    }
}

impl From<FormatError> for AppError {
    fn from(e: FormatError) -> Self {
        AppError::Invalid(e.to_string())
    }
}

impl From<StoreError> for AppError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => AppError::not_found("service", id),
            StoreError::Invalid(m) => AppError::Invalid(m),
            StoreError::BadId(id) => AppError::Invalid(format!("id {id:?} cannot be used as a file name")),
            StoreError::Format { file, error } => AppError::Invalid(format!("{file}: {error}")),
            e @ (StoreError::Io(_) | StoreError::InjectedCrash) => AppError::Io(e.to_string()),
        }
    }
}
