//! HTTP authorization and contract tests, driven through the router with
//! in-process requests.

mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::{http_fixture, ADMIN_TOKEN, T1_TOKEN, T2_TOKEN};
use http_body_util::BodyExt;
use oticctl::router;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(
    fixture: &common::HttpFixture,
    method: &str,
    path: &str,
    token: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let app = router(fixture.state.clone());
    let mut builder = Request::builder().method(method).uri(path);
    if let Some(t) = token {
        builder = builder.header("authorization", format!("Bearer {t}"));
    }
    let request = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = app.oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::Null)
    };
    (status, value)
}

#[tokio::test]
async fn missing_or_bad_token_is_401() {
    let f = http_fixture();
    let (status, _) = call(&f, "GET", "/tenants/t1", None, None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call(&f, "GET", "/tenants/t1", Some("wrong"), None).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn tenant_cannot_read_another_tenant() {
    let f = http_fixture();
    let (status, _) = call(&f, "GET", "/tenants/t2", Some(T1_TOKEN), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    // Probing a nonexistent tenant looks identical.
    let (status, _) = call(&f, "GET", "/tenants/t99", Some(T1_TOKEN), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, doc) = call(&f, "GET", "/tenants/t1", Some(T1_TOKEN), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["block"], "10.77.4.0/24");
}

#[tokio::test]
async fn admin_creates_tenants_and_reads_everything() {
    let f = http_fixture();
    let (status, doc) = call(
        &f,
        "POST",
        "/tenants",
        Some(ADMIN_TOKEN),
        Some(json!({"name": "carol"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(doc["block"], "10.77.6.0/24");
    let (status, _) = call(&f, "GET", "/tenants/carol", Some(ADMIN_TOKEN), None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(&f, "GET", "/tenants/t99", Some(ADMIN_TOKEN), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    // Tenants cannot mint tenants.
    let (status, _) = call(
        &f,
        "POST",
        "/tenants",
        Some(T1_TOKEN),
        Some(json!({"name": "mallory"})),
    )
    .await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    // Duplicate names conflict.
    let (status, _) = call(
        &f,
        "POST",
        "/tenants",
        Some(ADMIN_TOKEN),
        Some(json!({"name": "acme"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn device_registration_is_owner_scoped() {
    let f = http_fixture();
    let body = |owner: &str| {
        json!({
            "site": "site1",
            "owner": owner,
            "role": "te",
            "kind": "compute",
            "ports": [{"name": "eth0", "medium": "ethernet", "capacity_gbps": 25}],
        })
    };
    let (status, doc) = call(&f, "POST", "/devices", Some(T1_TOKEN), Some(body("t1"))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(doc["id"].as_str().unwrap().starts_with('d'));
    let (status, _) = call(&f, "POST", "/devices", Some(T1_TOKEN), Some(body("t2"))).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = call(&f, "POST", "/devices", Some(T1_TOKEN), Some(body("otic"))).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = call(&f, "POST", "/devices", Some(ADMIN_TOKEN), Some(body("t2"))).await;
    assert_eq!(status, StatusCode::CREATED);
}

#[tokio::test]
async fn links_are_admin_only() {
    let f = http_fixture();
    let body = json!({"a": "sw1:p6", "b": "sw1:p7", "kind": "trunk"});
    let (status, _) = call(&f, "POST", "/links", Some(T1_TOKEN), Some(body.clone())).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, doc) = call(&f, "POST", "/links", Some(ADMIN_TOKEN), Some(body)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(doc["id"].as_str().unwrap().starts_with('l'));
}

fn session_body(f: &common::HttpFixture) -> Value {
    json!({
        "kind": "du_conformance",
        "tenants": ["t1"],
        "participants": [f.du.to_string(), f.emu.to_string(), f.core.to_string()],
    })
}

#[tokio::test]
async fn session_lifecycle_over_http() {
    let f = http_fixture();
    // Tenant 1 may plan a session for itself.
    let (status, doc) = call(&f, "POST", "/sessions", Some(T1_TOKEN), Some(session_body(&f))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(doc["state"], "draft");
    let sid = doc["id"].as_str().unwrap().to_string();

    // Tenant 2 can neither see nor drive it.
    let (status, _) = call(&f, "GET", &format!("/sessions/{sid}"), Some(T2_TOKEN), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = call(
        &f,
        "POST",
        &format!("/sessions/{sid}/provision"),
        Some(T2_TOKEN),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::FORBIDDEN);

    let (status, doc) = call(
        &f,
        "POST",
        &format!("/sessions/{sid}/provision"),
        Some(T1_TOKEN),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["state"], "provisioned");
    let (status, doc) = call(
        &f,
        "POST",
        &format!("/sessions/{sid}/verify"),
        Some(T1_TOKEN),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["state"], "active");
    let (status, doc) = call(
        &f,
        "POST",
        &format!("/sessions/{sid}/teardown"),
        Some(ADMIN_TOKEN),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["state"], "torn_down");
}

#[tokio::test]
async fn tenant_cannot_plan_sessions_for_others() {
    let f = http_fixture();
    let mut body = session_body(&f);
    body["tenants"] = json!(["t1", "t2"]);
    let (status, _) = call(&f, "POST", "/sessions", Some(T1_TOKEN), Some(body)).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    // Planning over someone else's DUT is a 422-class engine error for the
    // admin (template rules), not an authorization hole.
    let mut body = session_body(&f);
    body["tenants"] = json!(["t2"]);
    let (status, _) = call(&f, "POST", "/sessions", Some(ADMIN_TOKEN), Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn template_violations_are_422() {
    let f = http_fixture();
    let body = json!({
        "kind": "du_conformance",
        "tenants": ["t1"],
        "participants": [f.du.to_string()],
    });
    let (status, doc) = call(&f, "POST", "/sessions", Some(ADMIN_TOKEN), Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(doc["error"].as_str().unwrap().contains("template"));
}

#[tokio::test]
async fn provision_on_exhausted_pool_is_409_with_rollback() {
    let (engine, t1, t2, du, emu, core) = common::engine_fixture();
    // Drain the VID pool so provisioning cannot complete.
    let mut state = engine.state().clone();
    for i in 0..otic_core::vlan::VID_CAPACITY as u32 {
        state
            .vlans
            .allocate(otic_core::vlan::VidPurpose {
                interface: otic_core::ipam::InterfaceKind::F1,
                session: otic_core::SessionId(50_000 + i),
                plane: None,
            })
            .unwrap();
    }
    let f = common::http_fixture_from(otic_core::engine::Engine::from_state(state), t1, t2, du, emu, core);
    let (status, doc) = call(&f, "POST", "/sessions", Some(ADMIN_TOKEN), Some(session_body(&f))).await;
    assert_eq!(status, StatusCode::CREATED);
    let sid = doc["id"].as_str().unwrap().to_string();
    let hash_before = f.state.engine.read().unwrap().state_hash();
    let (status, doc) = call(
        &f,
        "POST",
        &format!("/sessions/{sid}/provision"),
        Some(ADMIN_TOKEN),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(doc["rollback"], json!(true));
    // Rollback confirmed: nothing changed.
    assert_eq!(f.state.engine.read().unwrap().state_hash(), hash_before);
}

#[tokio::test]
async fn facility_views_are_admin_only() {
    let f = http_fixture();
    for path in ["/fabric/report", "/configs"] {
        let (status, _) = call(&f, "GET", path, Some(T1_TOKEN), None).await;
        assert_eq!(status, StatusCode::FORBIDDEN, "{path}");
        let (status, _) = call(&f, "GET", path, Some(ADMIN_TOKEN), None).await;
        assert_eq!(status, StatusCode::OK, "{path}");
    }
    let (_, doc) = call(&f, "GET", "/fabric/report", Some(ADMIN_TOKEN), None).await;
    assert_eq!(doc["summary"], "pass");
}
