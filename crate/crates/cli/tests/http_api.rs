use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use ared_cli::server::{router, AppState, TOKEN_HEADER};

fn peaks_like(x: f64, y: f64) -> f64 {
    (-(x * x + y * y) / 4.0).exp() * 3.0 + 0.5 * x
}

fn app(dir: &std::path::Path, token: Option<&str>) -> Router {
    let state = AppState::open(dir, token.map(str::to_owned)).unwrap();
    router(Arc::new(state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn create_body() -> Value {
    let corners: Vec<Value> = [(-2.0, -2.0), (-2.0, 2.0), (2.0, -2.0), (2.0, 2.0)]
        .iter()
        .map(|&(x, y)| json!({"coords": [x, y], "value": peaks_like(x, y)}))
        .collect();
    json!({"bounds": [[-2.0, 2.0], [-2.0, 2.0]], "seed": 11, "initial": corners})
}

async fn create(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(create_body())).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_owned()
}

#[tokio::test]
async fn propose_record_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), None);
    let id = create(&app).await;

    let (status, summary) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["status"], "ready_to_propose");
    assert_eq!(summary["initial"], 4);

    for _ in 0..3 {
        let (status, p) = call(&app, "POST", &format!("/sessions/{id}/proposal"), None).await;
        assert_eq!(status, StatusCode::OK, "{p}");
        assert_eq!(p["coords"].as_array().unwrap().len(), 2);
        assert!(p["provenance"] == "drawn" || p["provenance"] == "feedback");
        let d = p["constraint"]["d"].as_f64().unwrap();
        let threshold = p["constraint"]["threshold"].as_f64().unwrap();
        assert!(d > threshold);

        let (x, y) = (p["coords"][0].as_f64().unwrap(), p["coords"][1].as_f64().unwrap());
        let (status, r) = call(
            &app,
            "POST",
            &format!("/sessions/{id}/result"),
            Some(json!({"value": peaks_like(x, y)})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{r}");
        assert!(r["r"].as_f64().unwrap().is_finite());
    }

    let (status, h) = call(&app, "GET", &format!("/sessions/{id}/history"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(h.as_array().unwrap().len(), 3);

    let (status, s) = call(&app, "GET", &format!("/sessions/{id}/surface?resolution=7"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["kind"], "grid");
    let rows = s["predicted"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r.as_array().unwrap().len() == 7));
    assert_eq!(s["archive"].as_array().unwrap().len(), 7);

    assert!(dir.path().join(format!("{id}.json")).exists());
}

#[tokio::test]
async fn protocol_violations_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), None);
    let id = create(&app).await;

    let (status, body) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/result"),
        Some(json!({"value": 1.0})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "WrongState");
    assert_eq!(body["status"], "ready_to_propose");

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/proposal"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/proposal"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "WrongState");
    assert_eq!(body["status"], "awaiting_measurement");
}

#[tokio::test]
async fn failed_mutation_leaves_session_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), None);
    let id = create(&app).await;
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    let (status, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/result"),
        Some(json!({"value": 2.0})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, after) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let app = app(dir.path(), None);
        let id = create(&app).await;
        call(&app, "POST", &format!("/sessions/{id}/proposal"), None).await;
        id
    };
    let app = app(dir.path(), None);
    let (status, s) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(s["status"], "awaiting_measurement");
    assert!(s["pending"]["coords"].is_array());
}

#[tokio::test]
async fn unknown_session_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), None);
    let (status, body) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "NotFound");

    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"seed": 1}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "InvalidConfig");

    let id = create(&app).await;
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/surface?resolution=1"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn token_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), Some("s3cret"));
    let (status, body) = call(&app, "POST", "/sessions", Some(create_body())).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["error"], "Unauthorized");

    let req = Request::builder()
        .method("POST")
        .uri("/sessions")
        .header("content-type", "application/json")
        .header(TOKEN_HEADER, "s3cret")
        .body(Body::from(create_body().to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
}
