mod common;

use axum::http::StatusCode;
use serde_json::json;

use common::{app, get, post_csv, post_json, rule0_json};

const HEADER: &str = "timestamp,signal,value\n";

#[tokio::test]
async fn rule0_two_rows_one_alert() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = post_json(&app, "/rules", &rule0_json()).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert_eq!(v["rule_id"], "rule0");
    let golden = include_str!("../../core/tests/golden/rule0.txt");
    assert_eq!(v["canonical_text"], golden);

    let csv = format!("{HEADER}2014-10-01T08:00:00Z,cgm,14.0\n2014-10-01T09:00:00Z,hr,125.0\n");
    let (s, v) = post_csv(&app, "/patients/p1/events", &csv).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v, json!({"accepted": 2, "rejected": 0, "alerts_raised": 1}));

    let (s, v) = get(&app, "/patients/p1/alerts").await;
    assert_eq!(s, StatusCode::OK);
    let alerts = v.as_array().unwrap();
    assert_eq!(alerts.len(), 1);
    assert_eq!(alerts[0]["rule_id"], "rule0");
    assert_eq!(alerts[0]["raised_at"], 3600);
    assert_eq!(alerts[0]["timestamp"], "2014-10-01T09:00:00Z");
    assert_eq!(alerts[0]["recipients"], json!(["doctor"]));
    assert_eq!(alerts[0]["evidence"].as_array().unwrap().len(), 2);

    // Window filters.
    let (_, v) = get(&app, "/patients/p1/alerts?from=2014-10-01T09:00:01Z").await;
    assert_eq!(v, json!([]));
    let (_, v) = get(&app, "/patients/p1/alerts?from=2014-10-01T08:00:00Z&to=2014-10-01T09:00:00Z").await;
    assert_eq!(v.as_array().unwrap().len(), 1);
    let (s, v) = get(&app, "/patients/p1/alerts?from=2014-10-02T00:00:00Z&to=2014-10-01T00:00:00Z").await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
    let (s, _) = get(&app, "/patients/p1/alerts?from=noon").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn empty_log_has_no_alerts() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = get(&app, "/patients/nobody/alerts").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!([]));
    let (s, v) = get(&app, "/patients/nobody/fluents").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_patient");
    let (s, _) = post_json(&app, "/patients/nobody/replay", &json!(null)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn rule_conflicts_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = post_json(&app, "/rules?dry_run=true", &rule0_json()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["deployed"], false);
    let (_, v) = get(&app, "/rules").await;
    assert_eq!(v, json!([]));

    assert_eq!(post_json(&app, "/rules", &rule0_json()).await.0, StatusCode::CREATED);
    let (s, v) = post_json(&app, "/rules", &rule0_json()).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "duplicate_rule_id");

    let leaf = json!({"kind": "simple", "atom": {"signal": "cgm", "comparator": "<", "threshold": 4.0}, "frequency": 1, "window": 600});
    let inner = json!({"kind": "complex_sequential", "first": leaf, "then": leaf, "window": 600});
    let deep = json!({"rule_id": "deep", "recipients": ["doctor"], "pattern": {"kind": "complex_sequential", "first": inner, "then": leaf, "window": 600}});
    let (s, v) = post_json(&app, "/rules", &deep).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "invalid_rule");
    assert!(v["message"].as_str().unwrap().contains("depth 3"));

    let (s, v) = post_json(&app, "/rules", &json!({"rule_id": "x"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
    let (_, v) = get(&app, "/rules").await;
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn out_of_order_upload_rejected_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let csv = format!("{HEADER}2014-10-01T08:00:00Z,cgm,6.0\n2014-10-01T08:10:00Z,cgm,6.5\n");
    assert_eq!(post_csv(&app, "/patients/p1/events", &csv).await.0, StatusCode::OK);
    let log_before = std::fs::read_to_string(dir.path().join("narrative.ndjson")).unwrap();

    let late = format!("{HEADER}2014-10-01T08:05:00Z,cgm,7.0\n2014-10-01T08:20:00Z,cgm,7.5\n");
    let (s, v) = post_csv(&app, "/patients/p1/events", &late).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "out_of_order");
    assert_eq!(v["timestamp"], "2014-10-01T08:05:00Z");
    assert_eq!(std::fs::read_to_string(dir.path().join("narrative.ndjson")).unwrap(), log_before);

    // The 08:20 record was not applied either.
    let (_, v) = get(&app, "/patients/p1/fluents?fluent=obs(cgm)&at=2014-10-01T09:00:00Z").await;
    assert_eq!(v, json!([{"fluent": "obs(cgm)", "value": "value(6.5)"}]));

    // Same-tick records are not late.
    let same = format!("{HEADER}2014-10-01T08:10:00Z,hr,70\n");
    assert_eq!(post_csv(&app, "/patients/p1/events", &same).await.0, StatusCode::OK);
}

#[tokio::test]
async fn malformed_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = post_csv(&app, "/patients/p1/events", &format!("{HEADER}2014-10-01T08:00:00Z,ecg,1\n")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["row"], 2);
    let (s, _) = post_csv(&app, "/patients/p1/events", "nonsense").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post_json(&app, "/patients/p1/events", &json!([{"timestamp": "x"}])).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post_csv(&app, "/patients/bad%20id/events", &format!("{HEADER}2014-10-01T08:00:00Z,cgm,1\n")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = get(&app, "/patients/p1/fluents?fluent=obs(").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn json_records_and_fluents() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    // JSON uploads may arrive unsorted; they are applied in time order.
    let body = json!([
        {"timestamp": "2014-10-01T08:30:00Z", "signal": "hr", "value": 80.0},
        {"timestamp": "2014-10-01T08:00:00Z", "signal": "weight", "value": 71.5},
    ]);
    let (s, v) = post_json(&app, "/patients/p2/events", &body).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["accepted"], 2);
    let (_, v) = get(&app, "/patients/p2/fluents").await;
    assert_eq!(
        v,
        json!([{"fluent": "obs(hr)", "value": "value(80.0)"}, {"fluent": "obs(weight)", "value": "value(71.5)"}])
    );
    let (_, v) = get(&app, "/patients/p2/fluents?at=2014-10-01T08:00:00Z").await;
    assert_eq!(v, json!([{"fluent": "obs(weight)", "value": "value(71.5)"}]));
    let (_, v) = get(&app, "/patients/p2/fluents?at=2014-09-30T08:00:00Z").await;
    assert_eq!(v, json!([]));
    let (s, _) = get(&app, "/patients/p2/fluents?fluent=obs(").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, v) = post_json(&app, "/patients/p2/replay", &json!(null)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"events": 2, "mvis": 2, "alerts": 0}));
}

#[tokio::test]
async fn late_rule_applies_to_logged_history() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let csv = format!("{HEADER}2014-10-01T08:00:00Z,cgm,14.0\n2014-10-01T09:00:00Z,hr,125.0\n");
    assert_eq!(post_csv(&app, "/patients/p1/events", &csv).await.0, StatusCode::OK);
    assert_eq!(get(&app, "/patients/p1/alerts").await.1, json!([]));
    assert_eq!(post_json(&app, "/rules", &rule0_json()).await.0, StatusCode::CREATED);
    assert_eq!(get(&app, "/patients/p1/alerts").await.1.as_array().unwrap().len(), 1);
}
