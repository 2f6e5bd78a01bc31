//! HTTP face of the engine: the same operations as the CLI, behind static
//! bearer tokens with per-tenant scoping.
//!
//! Tenant tokens can read and mutate only their own tenant's resources;
//! facility-wide views (fabric report, switch configs, link cabling) are
//! admin-only, mirroring the rule that a tenant's access stops at its own
//! /24 and the shared services.

use std::collections::BTreeSet;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use otic_core::engine::{Command, Engine, EngineError, ErrorClass, Output};
use otic_core::features::FeatureSet;
use otic_core::inventory::{DeviceKind, DeviceRole, LinkKind, Owner, PortSpec};
use otic_core::switchcfg::export_switch_configs;
use otic_core::topology::{SessionKind, SessionOptions};
use otic_core::{SessionId, SiteId, TenantId};

use crate::auth::{Identity, TokenMap};

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<RwLock<Engine>>,
    pub tokens: Arc<TokenMap>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/tenants", post(create_tenant))
        .route("/tenants/{id}", get(show_tenant))
        .route("/devices", post(register_device))
        .route("/links", post(add_link))
        .route("/sessions", post(plan_session))
        .route("/sessions/{id}", get(show_session))
        .route("/sessions/{id}/provision", post(provision_session))
        .route("/sessions/{id}/verify", post(verify_session))
        .route("/sessions/{id}/teardown", post(teardown_session))
        .route("/fabric/report", get(fabric_report))
        .route("/configs", get(switch_configs))
        .with_state(state)
}

// ---------------------------------------------------------------------------
// Error envelope

pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "missing or invalid bearer token")
    }

    fn forbidden() -> Self {
        Self::new(StatusCode::FORBIDDEN, "cross-tenant access denied")
    }
}

impl From<EngineError> for ApiError {
    fn from(err: EngineError) -> Self {
        let status = match err.class() {
            ErrorClass::NotFound => StatusCode::NOT_FOUND,
            // Exhaustion is a conflict with current allocations; the
            // transaction has already rolled back when it surfaces.
            ErrorClass::Conflict | ErrorClass::Exhausted => StatusCode::CONFLICT,
            ErrorClass::TemplateViolation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorClass::Usage => StatusCode::BAD_REQUEST,
            ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "error": err.to_string() });
        if err.class() == ErrorClass::Exhausted {
            body["rollback"] = json!(true);
        }
        ApiError { status, body }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn identify(state: &AppState, headers: &HeaderMap) -> Result<Identity, ApiError> {
    let token = headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or_else(ApiError::unauthorized)?;
    state
        .tokens
        .identify(token)
        .ok_or_else(ApiError::unauthorized)
}

fn require_admin(identity: Identity) -> Result<(), ApiError> {
    match identity {
        Identity::Admin => Ok(()),
        Identity::Tenant(_) => Err(ApiError::forbidden()),
    }
}

/// Tenant tokens may touch a session iff they are among its tenants. The
/// scope check runs before existence so probing ids cannot enumerate other
/// tenants' sessions.
fn require_session_scope(
    state: &AppState,
    identity: Identity,
    session: SessionId,
) -> Result<(), ApiError> {
    match identity {
        Identity::Admin => Ok(()),
        Identity::Tenant(t) => {
            let engine = state.engine.read().expect("engine lock");
            match engine.state().sessions.get(&session) {
                Some(s) if s.tenants.contains(&t) => Ok(()),
                _ => Err(ApiError::forbidden()),
            }
        }
    }
}

fn execute(state: &AppState, cmd: Command) -> Result<Output, ApiError> {
    let mut engine = state.engine.write().expect("engine lock");
    Ok(engine.execute(cmd)?)
}

// ---------------------------------------------------------------------------
// Handlers

#[derive(Deserialize)]
struct CreateTenantBody {
    name: String,
}

async fn create_tenant(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<CreateTenantBody>,
) -> Result<Response, ApiError> {
    require_admin(identify(&state, &headers)?)?;
    match execute(&state, Command::CreateTenant { name: body.name })? {
        Output::Tenant(doc) => Ok((StatusCode::CREATED, Json(doc)).into_response()),
        other => unreachable!("create tenant returned {other:?}"),
    }
}

async fn show_tenant(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let identity = identify(&state, &headers)?;
    let engine = state.engine.read().expect("engine lock");
    let target = resolve_tenant(engine.state(), &id);
    if let Identity::Tenant(own) = identity {
        // Deny before existence: a foreign id looks the same whether or
        // not it exists.
        if target != Some(own) {
            return Err(ApiError::forbidden());
        }
    }
    let target = target.ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, format!("unknown tenant `{id}`"))
    })?;
    let doc = engine.state().tenant_doc(target).map_err(ApiError::from)?;
    Ok(Json(doc).into_response())
}

fn resolve_tenant(state: &otic_core::EngineState, key: &str) -> Option<TenantId> {
    if let Ok(id) = key.parse::<TenantId>() {
        return state.tenants.contains_key(&id).then_some(id);
    }
    state.tenant_by_name(key).map(|t| t.id)
}

#[derive(Deserialize)]
struct RegisterDeviceBody {
    site: SiteId,
    owner: String,
    role: DeviceRole,
    kind: DeviceKind,
    ports: Vec<PortSpec>,
    #[serde(default)]
    features: FeatureSet,
}

async fn register_device(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<RegisterDeviceBody>,
) -> Result<Response, ApiError> {
    let identity = identify(&state, &headers)?;
    let owner = if body.owner == "otic" {
        Owner::Otic
    } else {
        let id = body
            .owner
            .parse::<TenantId>()
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
        Owner::Tenant(id)
    };
    if let Identity::Tenant(t) = identity {
        if owner != Owner::Tenant(t) {
            return Err(ApiError::forbidden());
        }
    }
    let warnings = body.features.unknown_keys();
    match execute(&state, Command::RegisterDevice {
        site: body.site,
        owner,
        role: body.role,
        kind: body.kind,
        ports: body.ports,
        features: body.features,
    })? {
        Output::Device(id) => Ok((
            StatusCode::CREATED,
            Json(json!({ "id": id, "warnings": warnings })),
        )
            .into_response()),
        other => unreachable!("register device returned {other:?}"),
    }
}

#[derive(Deserialize)]
struct AddLinkBody {
    a: String,
    b: String,
    kind: LinkKind,
}

async fn add_link(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<AddLinkBody>,
) -> Result<Response, ApiError> {
    // Physical cabling is facility work.
    require_admin(identify(&state, &headers)?)?;
    let (a, b) = {
        let engine = state.engine.read().expect("engine lock");
        (
            resolve_port(engine.state(), &body.a)?,
            resolve_port(engine.state(), &body.b)?,
        )
    };
    match execute(&state, Command::AddLink {
        a,
        b,
        kind: body.kind,
    })? {
        Output::Link(id) => Ok((StatusCode::CREATED, Json(json!({ "id": id }))).into_response()),
        other => unreachable!("add link returned {other:?}"),
    }
}

/// Ports are referenced as `p12` or `owner:port-name` (`d3:eth0`,
/// `sw1:p15`).
pub fn resolve_port(
    state: &otic_core::EngineState,
    key: &str,
) -> Result<otic_core::PortId, ApiError> {
    if let Some((owner, name)) = key.split_once(':') {
        return state
            .inventory
            .port_by_name(owner, name)
            .map(|p| p.id)
            .ok_or_else(|| {
                ApiError::new(StatusCode::NOT_FOUND, format!("unknown port `{key}`"))
            });
    }
    key.parse::<otic_core::PortId>()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))
}

#[derive(Deserialize)]
struct PlanSessionBody {
    kind: SessionKind,
    tenants: BTreeSet<TenantId>,
    participants: Vec<otic_core::DeviceId>,
    #[serde(default)]
    options: Option<SessionOptions>,
}

async fn plan_session(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<PlanSessionBody>,
) -> Result<Response, ApiError> {
    let identity = identify(&state, &headers)?;
    if let Identity::Tenant(t) = identity {
        if body.tenants != BTreeSet::from([t]) {
            return Err(ApiError::forbidden());
        }
    }
    match execute(&state, Command::PlanSession {
        kind: body.kind,
        tenants: body.tenants,
        participants: body.participants,
        options: body.options.unwrap_or_default(),
    })? {
        Output::Session(doc) => Ok((StatusCode::CREATED, Json(doc)).into_response()),
        other => unreachable!("plan session returned {other:?}"),
    }
}

async fn show_session(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<SessionId>,
) -> Result<Response, ApiError> {
    let identity = identify(&state, &headers)?;
    require_session_scope(&state, identity, id)?;
    let engine = state.engine.read().expect("engine lock");
    let doc = engine.state().session_doc(id).map_err(ApiError::from)?;
    Ok(Json(doc).into_response())
}

async fn provision_session(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<SessionId>,
) -> Result<Response, ApiError> {
    let identity = identify(&state, &headers)?;
    require_session_scope(&state, identity, id)?;
    session_command(&state, Command::ProvisionSession { session: id })
}

async fn verify_session(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<SessionId>,
) -> Result<Response, ApiError> {
    let identity = identify(&state, &headers)?;
    require_session_scope(&state, identity, id)?;
    session_command(&state, Command::VerifySession { session: id })
}

async fn teardown_session(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<SessionId>,
) -> Result<Response, ApiError> {
    let identity = identify(&state, &headers)?;
    require_session_scope(&state, identity, id)?;
    session_command(&state, Command::TeardownSession { session: id })
}

fn session_command(state: &AppState, cmd: Command) -> Result<Response, ApiError> {
    match execute(state, cmd)? {
        Output::Session(doc) => Ok(Json(doc).into_response()),
        other => unreachable!("session command returned {other:?}"),
    }
}

#[derive(Serialize)]
struct FabricReportBody {
    report: otic_core::fabric::VerificationReport,
    summary: &'static str,
}

async fn fabric_report(
    State(state): State<AppState>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    require_admin(identify(&state, &headers)?)?;
    let engine = state.engine.read().expect("engine lock");
    let report = engine.state().verify_all().map_err(ApiError::from)?;
    let summary = if report.passed() {
        "pass"
    } else if !report.isolation_passed() {
        "isolation_violation"
    } else {
        "intent_failure"
    };
    Ok(Json(FabricReportBody { report, summary }).into_response())
}

async fn switch_configs(
    State(state): State<AppState>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    require_admin(identify(&state, &headers)?)?;
    let engine = state.engine.read().expect("engine lock");
    Ok(Json(export_switch_configs(engine.state())).into_response())
}
