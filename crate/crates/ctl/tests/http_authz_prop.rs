//! Authorization completeness: fuzz (token, route) pairs and check that
//! every route enforces the tenant-scoping rule. No request may cross a
//! tenant boundary without the admin token, and unauthenticated requests
//! never reach a handler.

mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::{http_fixture, HttpFixture, ADMIN_TOKEN, T1_TOKEN, T2_TOKEN};
use http_body_util::BodyExt;
use oticctl::router;
use proptest::prelude::*;
use serde_json::json;
use tower::ServiceExt;

#[derive(Debug, Clone, Copy)]
enum Caller {
    Anonymous,
    Garbage,
    Admin,
    Tenant1,
    Tenant2,
}

#[derive(Debug, Clone, Copy)]
enum Route {
    ShowTenant1,
    ShowTenant2,
    CreateTenant,
    RegisterDeviceT1,
    AddLink,
    PlanSessionT1,
    ShowSessionT1,
    ProvisionSessionT1,
    VerifySessionT1,
    TeardownSessionT1,
    FabricReport,
    Configs,
}

impl Route {
    /// The tenant whose resources the route touches; `None` means the
    /// route is facility-wide and admin-only.
    fn target_tenant(self) -> Option<u32> {
        match self {
            Route::ShowTenant1
            | Route::RegisterDeviceT1
            | Route::PlanSessionT1
            | Route::ShowSessionT1
            | Route::ProvisionSessionT1
            | Route::VerifySessionT1
            | Route::TeardownSessionT1 => Some(1),
            Route::ShowTenant2 => Some(2),
            Route::CreateTenant | Route::AddLink | Route::FabricReport | Route::Configs => None,
        }
    }

    fn request(self, f: &HttpFixture, session: &str) -> (&'static str, String, Option<serde_json::Value>) {
        match self {
            Route::ShowTenant1 => ("GET", "/tenants/t1".into(), None),
            Route::ShowTenant2 => ("GET", "/tenants/t2".into(), None),
            Route::CreateTenant => (
                "POST",
                "/tenants".into(),
                Some(json!({"name": format!("fuzz-{}", session)})),
            ),
            Route::RegisterDeviceT1 => (
                "POST",
                "/devices".into(),
                Some(json!({
                    "site": "site1",
                    "owner": "t1",
                    "role": "te",
                    "kind": "compute",
                    "ports": [],
                })),
            ),
            Route::AddLink => (
                "POST",
                "/links".into(),
                Some(json!({"a": "sw1:p6", "b": "sw1:p7", "kind": "trunk"})),
            ),
            Route::PlanSessionT1 => (
                "POST",
                "/sessions".into(),
                Some(json!({
                    "kind": "du_conformance",
                    "tenants": ["t1"],
                    "participants": [f.du.to_string(), f.emu.to_string(), f.core.to_string()],
                })),
            ),
            Route::ShowSessionT1 => ("GET", format!("/sessions/{session}"), None),
            Route::ProvisionSessionT1 => ("POST", format!("/sessions/{session}/provision"), None),
            Route::VerifySessionT1 => ("POST", format!("/sessions/{session}/verify"), None),
            Route::TeardownSessionT1 => ("POST", format!("/sessions/{session}/teardown"), None),
            Route::FabricReport => ("GET", "/fabric/report".into(), None),
            Route::Configs => ("GET", "/configs".into(), None),
        }
    }
}

fn caller_strategy() -> impl Strategy<Value = Caller> {
    prop::sample::select(vec![
        Caller::Anonymous,
        Caller::Garbage,
        Caller::Admin,
        Caller::Tenant1,
        Caller::Tenant2,
    ])
}

fn route_strategy() -> impl Strategy<Value = Route> {
    prop::sample::select(vec![
        Route::ShowTenant1,
        Route::ShowTenant2,
        Route::CreateTenant,
        Route::RegisterDeviceT1,
        Route::AddLink,
        Route::PlanSessionT1,
        Route::ShowSessionT1,
        Route::ProvisionSessionT1,
        Route::VerifySessionT1,
        Route::TeardownSessionT1,
        Route::FabricReport,
        Route::Configs,
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]
    #[test]
    fn every_route_enforces_tenant_scoping(
        callers in prop::collection::vec(caller_strategy(), 1..12),
        routes in prop::collection::vec(route_strategy(), 1..12),
    ) {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        let f = http_fixture();
        // One session owned by tenant 1 so session routes have a target.
        let session = {
            let mut engine = f.state.engine.write().unwrap();
            let out = engine
                .execute(otic_core::engine::Command::PlanSession {
                    kind: otic_core::topology::SessionKind::DuConformance,
                    tenants: std::collections::BTreeSet::from([f.t1]),
                    participants: vec![f.du, f.emu, f.core],
                    options: Default::default(),
                })
                .unwrap();
            match out {
                otic_core::engine::Output::Session(doc) => doc.session.id.to_string(),
                other => panic!("unexpected {other:?}"),
            }
        };
        for (caller, route) in callers.iter().zip(routes.iter()) {
            let (method, path, body) = route.request(&f, &session);
            let token = match caller {
                Caller::Anonymous => None,
                Caller::Garbage => Some("not-a-real-token"),
                Caller::Admin => Some(ADMIN_TOKEN),
                Caller::Tenant1 => Some(T1_TOKEN),
                Caller::Tenant2 => Some(T2_TOKEN),
            };
            let app = router(f.state.clone());
            let mut builder = Request::builder().method(method).uri(&path);
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
            let status = rt.block_on(async {
                let resp = app.oneshot(request).await.unwrap();
                let status = resp.status();
                let _ = resp.into_body().collect().await;
                status
            });
            match caller {
                Caller::Anonymous | Caller::Garbage => {
                    prop_assert_eq!(status, StatusCode::UNAUTHORIZED, "{:?} {}", caller, path);
                }
                Caller::Admin => {
                    prop_assert_ne!(status, StatusCode::UNAUTHORIZED, "admin {}", path);
                    prop_assert_ne!(status, StatusCode::FORBIDDEN, "admin {}", path);
                }
                Caller::Tenant1 => {
                    if route.target_tenant() == Some(1) {
                        prop_assert_ne!(status, StatusCode::UNAUTHORIZED, "t1 {}", path);
                        prop_assert_ne!(status, StatusCode::FORBIDDEN, "t1 {}", path);
                    } else {
                        prop_assert_eq!(status, StatusCode::FORBIDDEN, "t1 {}", path);
                    }
                }
                Caller::Tenant2 => {
                    if route.target_tenant() == Some(2) {
                        prop_assert_ne!(status, StatusCode::UNAUTHORIZED, "t2 {}", path);
                        prop_assert_ne!(status, StatusCode::FORBIDDEN, "t2 {}", path);
                    } else {
                        prop_assert_eq!(status, StatusCode::FORBIDDEN, "t2 {}", path);
                    }
                }
            }
        }
    }
}
