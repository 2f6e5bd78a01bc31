//! Small facility fixture for HTTP and CLI tests: one site, one switch,
//! two tenants, and a DU-conformance device triple owned by tenant 1.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use otic_core::engine::{Command, Engine, Output};
use otic_core::inventory::{
    ClockRole, DeviceKind, DeviceRole, LinkKind, Owner, PortSpec, SiteKind,
};
use otic_core::{DeviceId, TenantId};
use oticctl::auth::TokenMap;
use oticctl::AppState;

pub const ADMIN_TOKEN: &str = "root-token";
pub const T1_TOKEN: &str = "acme-token";
pub const T2_TOKEN: &str = "bravo-token";

pub struct HttpFixture {
    pub state: AppState,
    pub t1: TenantId,
    pub t2: TenantId,
    pub du: DeviceId,
    pub emu: DeviceId,
    pub core: DeviceId,
}

pub fn engine_fixture() -> (Engine, TenantId, TenantId, DeviceId, DeviceId, DeviceId) {
    let mut engine = Engine::in_memory();
    let mut run = |cmd| engine.execute(cmd).expect("fixture command");
    run(Command::InitPlan {
        base: "10.77.0.0/16".parse().unwrap(),
    });
    let Output::Site(site) = run(Command::RegisterSite {
        name: "dc".into(),
        kind: SiteKind::DataCenter,
    }) else {
        panic!("site")
    };
    let Output::Switch(sw) = run(Command::RegisterSwitch {
        site,
        model: "S5248F-ON".into(),
        ports: (0..8).map(|i| PortSpec::eth(format!("p{i}"), 100)).collect(),
        clock_role: ClockRole::TBc,
    }) else {
        panic!("switch")
    };
    let Output::Tenant(t1) = run(Command::CreateTenant { name: "acme".into() }) else {
        panic!("tenant")
    };
    let Output::Tenant(t2) = run(Command::CreateTenant { name: "bravo".into() }) else {
        panic!("tenant")
    };
    let mut device = |owner, role, kind, eth: u32| -> DeviceId {
        let ports: Vec<PortSpec> = (0..eth).map(|i| PortSpec::eth(format!("eth{i}"), 25)).collect();
        let Output::Device(d) = engine
            .execute(Command::RegisterDevice {
                site,
                owner,
                role,
                kind,
                ports,
                features: Default::default(),
            })
            .expect("device")
        else {
            panic!("device")
        };
        d
    };
    let du = device(Owner::Tenant(t1.id), DeviceRole::Dut, DeviceKind::Du, 2);
    let emu = device(Owner::Otic, DeviceRole::Te, DeviceKind::RuUeEmulator, 2);
    let core = device(Owner::Otic, DeviceRole::Te, DeviceKind::CoreEmulator, 1);
    // Wire every device port to the switch in order.
    let mut next = 0usize;
    let dev_ports: Vec<_> = [du, emu, core]
        .iter()
        .flat_map(|d| {
            engine
                .state()
                .inventory
                .device(*d)
                .unwrap()
                .ports
                .iter()
                .map(|p| p.id)
                .collect::<Vec<_>>()
        })
        .collect();
    for p in dev_ports {
        let sp = engine.state().inventory.switch(sw).unwrap().ports[next].id;
        next += 1;
        engine
            .execute(Command::AddLink {
                a: p,
                b: sp,
                kind: LinkKind::Access,
            })
            .expect("link");
    }
    (engine, t1.id, t2.id, du, emu, core)
}

pub fn http_fixture() -> HttpFixture {
    let (engine, t1, t2, du, emu, core) = engine_fixture();
    http_fixture_from(engine, t1, t2, du, emu, core)
}

pub fn http_fixture_from(
    engine: Engine,
    t1: TenantId,
    t2: TenantId,
    du: DeviceId,
    emu: DeviceId,
    core: DeviceId,
) -> HttpFixture {
    let tokens = TokenMap {
        version: 1,
        admin_token: ADMIN_TOKEN.into(),
        tenant_tokens: BTreeMap::from([
            (T1_TOKEN.to_string(), t1),
            (T2_TOKEN.to_string(), t2),
        ]),
    };
    HttpFixture {
        state: AppState {
            engine: Arc::new(RwLock::new(engine)),
            tokens: Arc::new(tokens),
        },
        t1,
        t2,
        du,
        emu,
        core,
    }
}
