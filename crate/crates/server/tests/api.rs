use std::time::Duration;

use archforge_core::bundled;
use archforge_core::io::to_canonical;
use archforge_core::synth::{synthesize, SynthOptions, SynthOutcome};
use archforge_server::{app, AppState, Config};
use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn state(config: Config) -> AppState {
    AppState::new(bundled::dc(), config)
}

async fn call(app: &Router, method: Method, uri: &str, body: impl Into<String>) -> (StatusCode, String, Option<String>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.into()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let location = resp.headers().get(header::LOCATION).map(|v| v.to_str().unwrap().to_string());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap(), location)
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

async fn session_with_query(app: &Router, query: &str) -> String {
    let (s, body, _) = call(app, Method::POST, "/v1/sessions", r#"{"bundled": "dc"}"#).await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    let id = json(&body)["id"].as_str().unwrap().to_string();
    let q = bundled::query_source(query).unwrap();
    let (s, body, _) = call(app, Method::PUT, &format!("/v1/sessions/{id}/query"), q).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    id
}

/// Follows a 202 to completion by polling its job URL.
async fn settle(app: &Router, resp: (StatusCode, String, Option<String>)) -> (StatusCode, String) {
    let (mut status, mut body, location) = resp;
    if status != StatusCode::ACCEPTED {
        return (status, body);
    }
    let poll = location.expect("202 carries a Location header");
    assert_eq!(json(&body)["poll"], poll.as_str());
    for _ in 0..1200 {
        (status, body, _) = call(app, Method::GET, &poll, "").await;
        if status != StatusCode::ACCEPTED {
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    (status, body)
}

fn reference_design(query: &str) -> String {
    let q = bundled::query(query).unwrap();
    let SynthOutcome::Design(d) = synthesize(&bundled::dc(), &q, &SynthOptions::default()).unwrap() else { panic!() };
    to_canonical(&*d)
}

#[tokio::test]
async fn synthesize_returns_the_same_document_as_the_engine() {
    let app = app(state(Config::default()));
    let id = session_with_query(&app, "ml_training").await;
    let (s, _, _) = call(&app, Method::GET, &format!("/v1/sessions/{id}/designs/latest"), "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, body, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/synthesize"), "").await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body, reference_design("ml_training"));
    let d = json(&body);
    assert_eq!(d["workloads"]["ML_Training"]["load_balancer"], json!(["PLB"]));
    assert_eq!(d["workloads"]["ML_Training"]["transport"], json!(["RDMA"]));
    let (s, latest, _) = call(&app, Method::GET, &format!("/v1/sessions/{id}/designs/latest"), "").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(latest, body);
}

#[tokio::test]
async fn explain_packet_spray_over_http() {
    let app = app(state(Config::default()));
    let id = session_with_query(&app, "ml_training").await;
    let req = json!({"workload": "ML_Training", "role": "load_balancer", "preferred": "PacketSpray", "objective": "load_balancing"});
    let (s, body, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/explain"), req.to_string()).await;
    assert_eq!(s, StatusCode::CONFLICT, "explain needs a design first: {body}");
    assert_eq!(json(&body)["code"], "no_design");

    call(&app, Method::POST, &format!("/v1/sessions/{id}/synthesize"), "").await;
    let (s, body, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/explain"), req.to_string()).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let e = json(&body);
    assert_eq!(e["outcome"]["kind"], "CONFLICT");
    assert_eq!(e["outcome"]["categories"], json!(["SYSTEM_INCOMPATIBILITY", "INSUFFICIENT_INVENTORY"]));

    let (s, text, _) =
        call(&app, Method::POST, &format!("/v1/sessions/{id}/explain?render=template"), req.to_string()).await;
    assert_eq!(s, StatusCode::OK);
    assert!(text.starts_with("Why PacketSpray is not selected"), "{text}");

    let mut flex = req.clone();
    flex["flexible"] = json!(["transport"]);
    let (s, body, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/explain"), flex.to_string()).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(json(&body)["outcome"]["kind"], "ALTERNATIVE");

    let mut bad = req.clone();
    bad["flexible"] = json!(["warp_drive"]);
    let (s, body, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/explain"), bad.to_string()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let err = json(&body);
    assert_eq!(err["code"], "invalid_request");
    assert!(err["message"].as_str().unwrap().contains("warp_drive"));
    assert!(err["details"].is_array());
}

#[tokio::test]
async fn slow_solves_answer_202_and_can_be_polled() {
    let app = app(state(Config { sync_wait: Duration::ZERO, ..Config::default() }));
    let id = session_with_query(&app, "ml_training").await;
    let first = call(&app, Method::POST, &format!("/v1/sessions/{id}/synthesize"), "").await;
    assert_eq!(first.0, StatusCode::ACCEPTED, "{}", first.1);
    let (s, body) = settle(&app, first).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, reference_design("ml_training"));
    let (s, _, _) = call(&app, Method::GET, "/v1/jobs/nope", "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn parallel_solves_on_distinct_sessions_do_not_interfere() {
    let app = app(state(Config::default()));
    let queries = ["ml_training", "inference", "ml_training", "inference_no_programmable"];
    let mut ids = Vec::new();
    for i in 0..8 {
        ids.push((queries[i % queries.len()], session_with_query(&app, queries[i % queries.len()]).await));
    }
    let handles: Vec<_> = ids
        .iter()
        .map(|(q, id)| {
            let app = app.clone();
            let uri = format!("/v1/sessions/{id}/synthesize");
            let q = q.to_string();
            tokio::spawn(async move {
                let first = call(&app, Method::POST, &uri, "").await;
                (q, settle(&app, first).await)
            })
        })
        .collect();
    for h in handles {
        let (q, (s, body)) = h.await.unwrap();
        assert_eq!(s, StatusCode::OK, "{q}: {body}");
        assert_eq!(body, reference_design(&q), "{q}");
    }
}

#[tokio::test]
async fn sessions_expire_and_can_be_deleted() {
    let st = state(Config { ttl: Duration::from_millis(50), ..Config::default() });
    let app = app(st.clone());
    let (_, body, _) = call(&app, Method::POST, "/v1/sessions", "").await;
    let id = json(&body)["id"].as_str().unwrap().to_string();
    assert_eq!(st.session_count(), 1);
    tokio::time::sleep(Duration::from_millis(80)).await;
    let (s, _, _) = call(&app, Method::GET, &format!("/v1/sessions/{id}/designs/latest"), "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    st.evict_expired();
    assert_eq!(st.session_count(), 0);

    let app = self::app(state(Config::default()));
    let (_, body, _) = call(&app, Method::POST, "/v1/sessions", "").await;
    let id = json(&body)["id"].as_str().unwrap().to_string();
    let (s, _, _) = call(&app, Method::DELETE, &format!("/v1/sessions/{id}"), "").await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, body, _) = call(&app, Method::DELETE, &format!("/v1/sessions/{id}"), "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(json(&body)["code"], "not_found");
}

#[tokio::test]
async fn documents_are_validated_with_positions() {
    let app = app(state(Config::default()));
    let (s, body, _) = call(&app, Method::POST, "/v1/sessions", r#"{"bundled": "nope"}"#).await;
    assert_eq!(s, StatusCode::NOT_FOUND, "{body}");
    let (s, body, _) = call(&app, Method::POST, "/v1/sessions", r#"{"catalogs": [{"gadgets": []}]}"#).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
    assert_eq!(json(&body)["code"], "parse_error");

    let (_, body, _) = call(&app, Method::POST, "/v1/sessions", "").await;
    let id = json(&body)["id"].as_str().unwrap().to_string();
    let q = "{\n  \"topology\": {\"groups\": [{\"id\": \"g\", \"group_type\": \"RACK\"}]},\n  \"workloads\": [{\"id\": \"w\", \"deployed_at\": [\"nowhere\"]}]\n}";
    let (s, body, _) = call(&app, Method::PUT, &format!("/v1/sessions/{id}/query"), q).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    let err = json(&body);
    assert_eq!(err["code"], "invalid_document");
    assert!(err["details"][0].as_str().unwrap().starts_with("query:3:"), "{body}");
    let (s, body, _) = call(&app, Method::POST, &format!("/v1/sessions/{id}/synthesize"), "").await;
    assert_eq!(s, StatusCode::CONFLICT, "{body}");
}

#[tokio::test]
async fn catalog_sections_are_served() {
    let app = app(state(Config::default()));
    let (s, body, _) = call(&app, Method::GET, "/v1/catalog/systems", "").await;
    assert_eq!(s, StatusCode::OK);
    let systems = json(&body);
    assert!(systems.as_array().unwrap().iter().any(|s| s["id"] == "PacketSpray"));
    for kind in ["hardware", "roles", "orderings"] {
        let (s, body, _) = call(&app, Method::GET, &format!("/v1/catalog/{kind}"), "").await;
        assert_eq!(s, StatusCode::OK, "{kind}");
        assert!(!json(&body).as_array().unwrap().is_empty(), "{kind}");
    }
    let (s, _, _) = call(&app, Method::GET, "/v1/catalog/gizmos", "").await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (_, body, _) = call(&app, Method::POST, "/v1/sessions", r#"{"bundled": "cloud"}"#).await;
    let id = json(&body)["id"].as_str().unwrap().to_string();
    let (_, body, _) = call(&app, Method::GET, &format!("/v1/catalog/systems?session={id}"), "").await;
    assert!(json(&body).as_array().unwrap().iter().any(|s| s["id"] == "Kubernetes"));
}
