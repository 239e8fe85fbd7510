use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use analogist_core::config::{Config, Engine};
use analogist_core::genai::{DecodingParams, ProviderError, TextGenProvider};
use analogist_core::pipeline::Stage1Report;
use analogist_core::scoring::{FactorWeights, WeightConfig};
use analogist_core::session::SessionStore;
use analogist_server::{router, AppState};

const BOTTLES: &str = "Every day, 1.3 billion plastic bottles are sold around the world.";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config(data: &Path) -> Config {
    let mut c = Config::load(&fixtures().join("config/analogist.toml")).unwrap();
    c.data_dir = data.to_path_buf();
    c
}

fn app(data: &Path) -> Router {
    router(Arc::new(AppState::from_config(&config(data)).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, Vec<u8>) {
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
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    let json = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, json, bytes)
}

async fn create(app: &Router, statement: &str) -> String {
    let (status, body, _) = call(app, "POST", "/sessions", Some(json!({ "statement": statement }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

fn ids(session: &Value) -> Vec<String> {
    session["stage1"]["analogies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["candidate"]["candidate"]["id"].as_str().unwrap().to_string())
        .collect()
}

#[tokio::test]
async fn healthz() {
    let dir = tempfile::tempdir().unwrap();
    let (status, body, _) = call(&app(dir.path()), "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn round_trip_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let id = create(&a, BOTTLES).await;

    let (status, body, _) = call(&a, "POST", &format!("/sessions/{id}/design"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["message"], "choose_and_edit required");

    let (status, generated, _) = call(&a, "POST", &format!("/sessions/{id}/generate"), None).await;
    assert_eq!(status, StatusCode::OK, "{generated}");
    assert_eq!(generated["state"], "generated");

    let factors = json!({ "factors": { "similarity": 1.0, "familiarity": 0.0, "concreteness": 0.0 } });
    let (status, reranked, _) = call(&a, "POST", &format!("/sessions/{id}/rerank"), Some(factors)).await;
    assert_eq!(status, StatusCode::OK, "{reranked}");

    let top = ids(&reranked)[0].clone();
    let (status, chosen, _) =
        call(&a, "POST", &format!("/sessions/{id}/choose"), Some(json!({ "candidate_id": top }))).await;
    assert_eq!(status, StatusCode::OK, "{chosen}");

    let (status, designed, _) = call(&a, "POST", &format!("/sessions/{id}/design"), None).await;
    assert_eq!(status, StatusCode::OK, "{designed}");
    let objects: Vec<String> = serde_json::from_value(designed["scheme"]["objects"].clone()).unwrap();
    assert!(!objects.is_empty());

    let (status, done, _) = call(
        &a,
        "POST",
        &format!("/sessions/{id}/materials"),
        Some(json!({ "selected": [objects[0], designed["scheme"]["background"][0]] })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{done}");
    assert_eq!(done["state"], "materialized");
    let file = done["materials"]["items"][0]["images"][0]["file"].as_str().unwrap().to_string();
    let (status, _, png) = call(&a, "GET", &format!("/sessions/{id}/materials/{file}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(&png[..4], b"\x89PNG");

    drop(a);
    let b = app(dir.path());
    let (status, reloaded, _) = call(&b, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reloaded, done);
    let events: Vec<&str> = done["trace"].as_array().unwrap().iter().map(|t| t["event"].as_str().unwrap()).collect();
    assert_eq!(events.len(), 6, "{events:?}");
}

#[tokio::test]
async fn unknown_things_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    for uri in ["/sessions/abc123", "/sessions/..%2Fetc", "/nowhere"] {
        let (status, _, _) = call(&a, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
    let id = create(&a, BOTTLES).await;
    call(&a, "POST", &format!("/sessions/{id}/generate"), None).await;
    let (status, _, _) =
        call(&a, "POST", &format!("/sessions/{id}/choose"), Some(json!({ "candidate_id": "c99" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = call(&a, "GET", &format!("/sessions/{id}/materials/secret.png"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn out_of_order_calls_name_the_missing_step() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let id = create(&a, BOTTLES).await;
    let cases = [
        ("rerank", json!({ "factors": { "similarity": 1, "familiarity": 1, "concreteness": 1 } }), "generate required"),
        ("choose", json!({ "candidate_id": "c1" }), "generate required"),
        ("materials", json!({ "selected": ["x"] }), "design required"),
    ];
    for (step, body, message) in cases {
        let (status, resp, _) = call(&a, "POST", &format!("/sessions/{id}/{step}"), Some(body)).await;
        assert_eq!(status, StatusCode::CONFLICT, "{step}");
        assert_eq!(resp["error"]["message"], message);
    }
}

#[tokio::test]
async fn bad_bodies_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let (status, _, _) = call(&a, "POST", "/sessions", Some(json!({ "statment": BOTTLES }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _, _) = call(&a, "POST", "/sessions", Some(json!({ "statement": "  " }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let id = create(&a, BOTTLES).await;
    call(&a, "POST", &format!("/sessions/{id}/generate"), None).await;
    let negative = json!({ "factors": { "similarity": -1, "familiarity": 0, "concreteness": 0 } });
    let (status, _, _) = call(&a, "POST", &format!("/sessions/{id}/rerank"), Some(negative)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn rerank_matches_scoring_and_keeps_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let id = create(&a, BOTTLES).await;
    let (_, generated, _) = call(&a, "POST", &format!("/sessions/{id}/generate"), None).await;

    let similarity_only = WeightConfig {
        factors: FactorWeights {
            similarity: 1.0,
            familiarity: 0.0,
            concreteness: 0.0,
        },
        ..Default::default()
    };
    let mut expected: Stage1Report = serde_json::from_value(generated["stage1"].clone()).unwrap();
    expected.rerank(&similarity_only).unwrap();
    let expected_ids: Vec<String> = expected.analogies.iter().map(|a| a.candidate.candidate.id.clone()).collect();

    let body = json!({ "weights": similarity_only });
    let (_, first, _) = call(&a, "POST", &format!("/sessions/{id}/rerank"), Some(body.clone())).await;
    let (_, second, _) = call(&a, "POST", &format!("/sessions/{id}/rerank"), Some(body)).await;
    assert_eq!(ids(&first), expected_ids);
    assert_eq!(first["stage1"], second["stage1"]);

    let by_id = |s: &Value| {
        let mut v: Vec<Value> = s["stage1"]["analogies"].as_array().unwrap().iter().map(|a| a["candidate"].clone()).collect();
        v.sort_by_key(|c| c["candidate"]["id"].as_str().unwrap().to_string());
        v
    };
    assert_eq!(by_id(&generated), by_id(&first));
}

#[tokio::test]
async fn concurrent_reranks_serialize() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let id = create(&a, BOTTLES).await;
    call(&a, "POST", &format!("/sessions/{id}/generate"), None).await;
    let uri = format!("/sessions/{id}/rerank");
    let w1 = json!({ "factors": { "similarity": 1, "familiarity": 0, "concreteness": 0 } });
    let w2 = json!({ "factors": { "similarity": 0, "familiarity": 0, "concreteness": 1 } });
    let ((s1, _, _), (s2, _, _)) = tokio::join!(call(&a, "POST", &uri, Some(w1)), call(&a, "POST", &uri, Some(w2)));
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));

    let store = SessionStore::new(dir.path()).unwrap();
    let stored = store.load(&id).unwrap();
    let weights = stored.request.weights;
    let report = stored.stage1.clone().unwrap();
    assert_eq!(report.weights, weights);
    let mut fresh = report.clone();
    fresh.rerank(&weights).unwrap();
    assert_eq!(fresh, report, "stored order is consistent with the last writer's weights");
    let reranks = stored.trace.iter().filter(|t| t.event.starts_with("reranked")).count();
    assert_eq!(reranks, 2);
}

#[tokio::test]
async fn provider_failure_is_upstream_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let a = app(dir.path());
    let id = create(&a, "About 40 million tonnes of rice were exported.").await;
    let (status, body, _) = call(&a, "POST", &format!("/sessions/{id}/generate"), None).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY, "{body}");
    assert_eq!(body["error"]["stage"], "stage1.generate");
    let (_, session, _) = call(&a, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(session["state"], "created");
}

struct Slow;

impl TextGenProvider for Slow {
    fn complete(&self, _prompt: &str, _params: &DecodingParams) -> Result<String, ProviderError> {
        std::thread::sleep(Duration::from_millis(500));
        Err(ProviderError::Empty)
    }
}

#[tokio::test]
async fn slow_provider_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let mut engine = Engine::from_config(&config(dir.path())).unwrap();
    engine.text = Arc::new(Slow);
    let state = AppState::new(engine, SessionStore::new(dir.path()).unwrap(), Duration::from_millis(50));
    let a = router(Arc::new(state));
    let id = create(&a, BOTTLES).await;
    let (status, body, _) = call(&a, "POST", &format!("/sessions/{id}/generate"), None).await;
    assert_eq!(status, StatusCode::GATEWAY_TIMEOUT, "{body}");
    assert_eq!(body["error"]["stage"], "stage1");
}
