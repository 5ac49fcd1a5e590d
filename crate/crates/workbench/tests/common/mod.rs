#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use opa_workbench::api::{router, AppState};
use opa_workbench::SessionStore;
use serde_json::Value;
use tower::ServiceExt;

pub const TINY: &str = r#"{"schema_version":1,"t":[1],"s":[[1]],"r":[[[1,2,3]]]}"#;

/// Two experts, two attributes, four alternatives with partial constraints.
pub const SMALL: &str = r#"{
  "schema_version": 1,
  "t": [2, 1],
  "s": [[1, 2], [2, 1]],
  "r": [[[1, 2, 3, 4], [2, 1, 4, 3]], [[4, 3, 2, 1], [1, 3, 2, 4]]],
  "s_intervals": [[{"lo": 1, "hi": 2}, {"lo": 2, "hi": 2}], [{"lo": 1, "hi": 2}, {"lo": 1, "hi": 1}]],
  "t_intervals": [{"lo": 1.5, "hi": 2.5}, {"lo": 1.0, "hi": 1.5}],
  "lipschitz": 0.6,
  "utilities": [
    [{"constraints": [{"kind": "lottery_comparison", "r1": 1, "r2": 2, "r3": 4, "p": 0.5, "prefers_lottery": false}]}, {"constraints": []}],
    [{"constraints": []}, {"constraints": [{"kind": "lower_bound", "r": 2, "gamma": 0.6}]}]
  ],
  "scenarios": [[null, {"outcomes": [1, 3], "probabilities": [0.25, 0.75]}], [null, null]]
}"#;

pub fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(name)
}

pub fn app(dir: &std::path::Path) -> Router {
    router(Arc::new(AppState::new(SessionStore::open(dir).unwrap())))
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}
