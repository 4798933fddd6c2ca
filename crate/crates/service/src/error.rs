use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mfrs_core::engine::EngineError;
use mfrs_core::ingestion::DecodeError;
use mfrs_core::memo::{AudioError, WavError};
use mfrs_core::store::StoreError;
use mfrs_core::vision::VisionError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// The closed set of machine-readable error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    Validation,
    Unauthorized,
    NotFound,
    FramingFailed,
    UndecodableImage,
    UnsupportedAudio,
    MalformedAudio,
    EmptyAudio,
    PayloadTooLarge,
    MethodNotAllowed,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 12] = [
        Self::BadRequest,
        Self::Validation,
        Self::Unauthorized,
        Self::NotFound,
        Self::FramingFailed,
        Self::UndecodableImage,
        Self::UnsupportedAudio,
        Self::MalformedAudio,
        Self::EmptyAudio,
        Self::PayloadTooLarge,
        Self::MethodNotAllowed,
        Self::Internal,
    ];

    pub fn status(self) -> StatusCode {
        match self {
            Self::BadRequest
            | Self::Validation
            | Self::UndecodableImage
            | Self::UnsupportedAudio
            | Self::MalformedAudio
            | Self::EmptyAudio => StatusCode::BAD_REQUEST,
            Self::Unauthorized => StatusCode::UNAUTHORIZED,
            Self::NotFound => StatusCode::NOT_FOUND,
            Self::FramingFailed => StatusCode::UNPROCESSABLE_ENTITY,
            Self::PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            Self::MethodNotAllowed => StatusCode::METHOD_NOT_ALLOWED,
            Self::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::BadRequest => "bad_request",
            Self::Validation => "validation",
            Self::Unauthorized => "unauthorized",
            Self::NotFound => "not_found",
            Self::FramingFailed => "framing_failed",
            Self::UndecodableImage => "undecodable_image",
            Self::UnsupportedAudio => "unsupported_audio",
            Self::MalformedAudio => "malformed_audio",
            Self::EmptyAudio => "empty_audio",
            Self::PayloadTooLarge => "payload_too_large",
            Self::MethodNotAllowed => "method_not_allowed",
            Self::Internal => "internal",
        }
    }
}

/// JSON error body: `{code, message, details?}` with a status fixed by the code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn status(&self) -> StatusCode {
        self.code.status()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == ErrorCode::Internal {
            tracing::error!(message = %self.message, "request failed");
        }
        (self.status(), Json(self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::NotFound { .. } => ErrorCode::NotFound,
            StoreError::Validation(_) => ErrorCode::Validation,
            StoreError::CorruptSnapshot(_) | StoreError::UnsupportedVersion(_) => ErrorCode::BadRequest,
            StoreError::Journal(_) | StoreError::Io(_) => ErrorCode::Internal,
        };
        Self::new(code, e.to_string())
    }
}

impl From<DecodeError> for ApiError {
    fn from(e: DecodeError) -> Self {
        Self::new(ErrorCode::UndecodableImage, e.to_string())
    }
}

impl From<AudioError> for ApiError {
    fn from(e: AudioError) -> Self {
        let code = match &e {
            AudioError::Wav(WavError::Unsupported(_)) => ErrorCode::UnsupportedAudio,
            AudioError::Wav(WavError::Malformed(_)) => ErrorCode::MalformedAudio,
            AudioError::EmptyAudio => ErrorCode::EmptyAudio,
            AudioError::InvalidWindow(_) => ErrorCode::Validation,
        };
        Self::new(code, e.to_string())
    }
}

impl From<VisionError> for ApiError {
    fn from(e: VisionError) -> Self {
        let code = match &e {
            VisionError::InvalidImage(_) | VisionError::InvalidRegion(_) => ErrorCode::UndecodableImage,
            _ => ErrorCode::Internal,
        };
        Self::new(code, e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Decode(e) => e.into(),
            EngineError::Audio(e) => e.into(),
            EngineError::Store(e) => e.into(),
            EngineError::Vision(e) => e.into(),
            EngineError::Framing(report) => {
                let details = serde_json::to_value(&*report).unwrap_or(Value::Null);
                Self::new(ErrorCode::FramingFailed, format!("framing check failed: {:?}", report.failures))
                    .with_details(details)
            }
        }
    }
}
