//! HTTP routes over [`Service`].
//!
//! | method | path                        | body / query                     |
//! |--------|-----------------------------|----------------------------------|
//! | POST   | `/rules`                    | RuleSpec JSON, `?dry_run=true`   |
//! | GET    | `/rules`                    |                                  |
//! | POST   | `/patients/{id}/events`     | CSV, or JSON array of records    |
//! | GET    | `/patients/{id}/alerts`     | `?from=&to=` (RFC 3339)          |
//! | GET    | `/patients/{id}/fluents`    | `?fluent=&at=`                   |
//! | POST   | `/patients/{id}/replay`     |                                  |
//!
//! Errors are JSON objects with `error` (a stable kind) and `message`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde_json::{json, Value};

use ceckd::pattern::{PatternError, RuleSpec};
use ceckd::Term;

use crate::record::{format_timestamp, parse_csv, parse_timestamp, SignalRecord};
use crate::service::{Service, ServiceError};

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/rules", post(deploy_rule).get(list_rules))
        .route("/patients/{id}/events", post(push_events))
        .route("/patients/{id}/alerts", get(get_alerts))
        .route("/patients/{id}/fluents", get(get_fluents))
        .route("/patients/{id}/replay", post(replay))
        .with_state(svc)
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

fn bad(msg: impl Into<String>) -> ApiError {
    ApiError(ServiceError::BadRequest(msg.into()))
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        let (status, body) = match &self.0 {
            ServiceError::Parse(e) => (
                StatusCode::BAD_REQUEST,
                json!({"error": "malformed_body", "message": message, "row": e.row()}),
            ),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, json!({"error": "bad_request", "message": message})),
            ServiceError::UnknownPatient(_) => {
                (StatusCode::NOT_FOUND, json!({"error": "unknown_patient", "message": message}))
            }
            ServiceError::Rule(PatternError::DuplicateRuleId(id)) => (
                StatusCode::CONFLICT,
                json!({"error": "duplicate_rule_id", "message": message, "rule_id": id}),
            ),
            ServiceError::Rule(_) => (StatusCode::BAD_REQUEST, json!({"error": "invalid_rule", "message": message})),
            ServiceError::OutOfOrder { timestamp, last } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({
                    "error": "out_of_order",
                    "message": message,
                    "timestamp": format_timestamp(timestamp),
                    "last_tick": last,
                }),
            ),
            ServiceError::Log(_) | ServiceError::Engine(_) => {
                tracing::error!(%message, "request failed");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({"error": "internal", "message": message}))
            }
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Run service work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError),
        Err(e) => Err(ApiError(ServiceError::BadRequest(format!("request aborted: {e}")))),
    }
}

fn flag(q: &HashMap<String, String>, key: &str) -> ApiResult<bool> {
    match q.get(key).map(String::as_str) {
        None | Some("false") | Some("0") => Ok(false),
        Some("" | "true" | "1") => Ok(true),
        Some(v) => Err(bad(format!("{key}={v:?} is not a boolean"))),
    }
}

fn time_param(q: &HashMap<String, String>, key: &str) -> ApiResult<Option<DateTime<Utc>>> {
    q.get(key)
        .map(|v| parse_timestamp(v).map_err(|e| bad(format!("{key}={v:?}: {e}"))))
        .transpose()
}

async fn deploy_rule(
    State(svc): State<Arc<Service>>,
    Query(q): Query<HashMap<String, String>>,
    body: Bytes,
) -> ApiResult<Response> {
    let dry_run = flag(&q, "dry_run")?;
    let spec: RuleSpec = serde_json::from_slice(&body).map_err(|e| bad(format!("rule spec: {e}")))?;
    let out = blocking(move || svc.deploy(spec, dry_run)).await?;
    let status = if dry_run { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(out)).into_response())
}

async fn list_rules(State(svc): State<Arc<Service>>) -> Json<Vec<RuleSpec>> {
    Json(svc.rules())
}

fn decode_records(headers: &HeaderMap, body: &[u8]) -> ApiResult<Vec<SignalRecord>> {
    let ctype = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("text/csv");
    if ctype.contains("json") {
        serde_json::from_slice(body).map_err(|e| bad(format!("records: {e}")))
    } else {
        parse_csv(body).map_err(|e| ApiError(e.into()))
    }
}

async fn push_events(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let records = decode_records(&headers, &body)?;
    let n = records.len();
    match blocking(move || svc.ingest(&id, records)).await {
        Ok(s) => Ok(Json(json!(s))),
        Err(ApiError(e @ ServiceError::OutOfOrder { .. })) => {
            tracing::warn!(rejected = n, "{e}");
            Err(ApiError(e))
        }
        Err(e) => Err(e),
    }
}

async fn get_alerts(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let (from, to) = (time_param(&q, "from")?, time_param(&q, "to")?);
    let alerts = blocking(move || svc.alerts(&id, from, to)).await?;
    Ok(Json(json!(alerts)))
}

async fn get_fluents(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let fluent = q
        .get("fluent")
        .map(|f| Term::parse(f).map_err(|e| bad(format!("fluent={f:?}: {e}"))))
        .transpose()?;
    let at = time_param(&q, "at")?;
    let held = blocking(move || svc.fluents(&id, fluent, at)).await?;
    Ok(Json(json!(held)))
}

async fn replay(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = blocking(move || svc.replay(&id)).await?;
    Ok(Json(json!(s)))
}
