#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use ceckd_service::{http, Config, Service};

pub fn config(dir: &std::path::Path) -> Config {
    Config {
        data_dir: dir.to_path_buf(),
        ..Config::default()
    }
}

pub fn app(dir: &std::path::Path) -> Router {
    http::router(Arc::new(Service::open(&config(dir)).unwrap()))
}

pub async fn call(app: &Router, method: &str, uri: &str, ctype: Option<&str>, body: impl Into<Body>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(c) = ctype {
        req = req.header("content-type", c);
    }
    let resp = app.clone().oneshot(req.body(body.into()).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()))
    };
    (status, v)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, "GET", uri, None, Body::empty()).await
}

pub async fn post_json(app: &Router, uri: &str, body: &Value) -> (StatusCode, Value) {
    call(app, "POST", uri, Some("application/json"), body.to_string()).await
}

pub async fn post_csv(app: &Router, uri: &str, csv: &str) -> (StatusCode, Value) {
    call(app, "POST", uri, Some("text/csv"), csv.to_string()).await
}

pub fn rule0_json() -> Value {
    serde_json::json!({
        "rule_id": "rule0",
        "recipients": ["doctor"],
        "pattern": {
            "kind": "complex",
            "atoms": [
                {"signal": "cgm", "comparator": ">", "threshold": 13.0},
                {"signal": "hr", "comparator": ">", "threshold": 120.0}
            ],
            "frequency": 1,
            "window": 86400
        }
    })
}
