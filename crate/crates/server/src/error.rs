use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use transit_core::{AlertError, ArrivalError, GeoError, TrackerError};

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            field: None,
        }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn with_field(mut self, field: &str) -> Self {
        self.field = Some(field.to_string());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<ArrivalError> for ApiError {
    fn from(e: ArrivalError) -> Self {
        let msg = e.to_string();
        match e {
            ArrivalError::UnknownStop(_) => ApiError::not_found("unknown_stop", msg),
            ArrivalError::UnknownRoute(_) => ApiError::not_found("unknown_route", msg),
            ArrivalError::UnknownPattern(_) => ApiError::not_found("unknown_pattern", msg),
            ArrivalError::StopNotOnPattern { .. } => {
                ApiError::bad_request("stop_not_on_pattern", msg)
            }
            ArrivalError::InvalidHorizon => {
                ApiError::bad_request("invalid_query", msg).with_field("horizon_s")
            }
        }
    }
}

impl From<TrackerError> for ApiError {
    fn from(e: TrackerError) -> Self {
        let msg = e.to_string();
        match e {
            TrackerError::UnknownTrip(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_trip", msg)
                    .with_field("trip_id")
            }
            TrackerError::UnassignedVehicle(_) => {
                ApiError::new(StatusCode::CONFLICT, "unassigned_vehicle", msg)
            }
            TrackerError::InvalidFix(_) => ApiError::bad_request("invalid_fix", msg),
            TrackerError::InvalidConfig(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", msg)
            }
        }
    }
}

impl From<AlertError> for ApiError {
    fn from(e: AlertError) -> Self {
        let msg = e.to_string();
        match e {
            AlertError::ValidationFailed { field, .. } => {
                ApiError::bad_request("validation_failed", msg).with_field(field)
            }
            AlertError::UnknownAlert(_) => ApiError::not_found("unknown_alert", msg),
            AlertError::UnknownEntityRef { kind, .. } => {
                let field = match kind {
                    "route" => "affected_route_ids",
                    _ => "affected_stop_ids",
                };
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_reference", msg)
                    .with_field(field)
            }
            AlertError::UnknownEntity { kind, .. } => ApiError::not_found(
                if kind == "route" {
                    "unknown_route"
                } else {
                    "unknown_stop"
                },
                msg,
            ),
            AlertError::Io { .. } | AlertError::Corrupt { .. } => {
                tracing::error!("alert store: {msg}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", msg)
            }
        }
    }
}

impl From<GeoError> for ApiError {
    fn from(e: GeoError) -> Self {
        ApiError::bad_request("invalid_coordinate", e.to_string())
    }
}
