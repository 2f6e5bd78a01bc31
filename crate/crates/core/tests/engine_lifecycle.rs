//! Session lifecycle behavior against the two-site facility fixture.

mod common;

use std::collections::BTreeSet;

use common::{fig3_facility, run, EngineExt};
use otic_core::engine::{Command, EngineError, Output};
use otic_core::fabric;
use otic_core::inventory::{DeviceKind, DeviceRole, Owner, PortMedium, PortSpec};
use otic_core::ipam::InterfaceKind;
use otic_core::session::SessionState;
use otic_core::topology::{SessionKind, SessionOptions};

#[test]
fn tenants_get_first_fit_blocks_and_carvings() {
    let f = fig3_facility();
    let state = f.engine.state();
    let doc = state.tenant_doc(f.t1).unwrap();
    assert_eq!(doc.block, "10.77.4.0/24".parse().unwrap());
    assert_eq!(doc.vpn, "10.77.4.160/29".parse().unwrap());
    let doc = state.tenant_doc(f.t2).unwrap();
    assert_eq!(doc.block, "10.77.5.0/24".parse().unwrap());
}

#[test]
fn duplicate_tenant_name_is_rejected() {
    let mut f = fig3_facility();
    let err = f
        .engine
        .execute(Command::CreateTenant { name: "acme".into() })
        .unwrap_err();
    assert_eq!(err, EngineError::DuplicateTenantName("acme".into()));
}

#[test]
fn dut_owner_must_be_a_session_tenant() {
    let mut f = fig3_facility();
    // Tenant 2 claims a session over tenant 1's RU.
    let err = f
        .engine
        .execute(Command::PlanSession {
            kind: SessionKind::RuConformance,
            tenants: BTreeSet::from([f.t2]),
            participants: vec![f.ru0, f.du_emu, f.vst],
            options: SessionOptions::default(),
        })
        .unwrap_err();
    assert_eq!(
        err,
        EngineError::DutOwnerNotInSession {
            device: f.ru0,
            owner: f.t1
        }
    );
}

#[test]
fn fig3_scenario_provisions_disjointly_and_verifies_clean() {
    let mut f = fig3_facility();
    let (e2e, du_conf, ru_conf) = f.plan_fig3_sessions();
    for s in [e2e, du_conf, ru_conf] {
        f.provision(s);
    }

    // Pairwise-disjoint VID sets and subnets.
    let vid_sets = [f.session_vids(e2e), f.session_vids(du_conf), f.session_vids(ru_conf)];
    for (i, a) in vid_sets.iter().enumerate() {
        for b in &vid_sets[i + 1..] {
            assert!(a.is_disjoint(b), "VID sets overlap: {a:?} vs {b:?}");
        }
    }
    let subnet_sets = [
        f.session_subnets(e2e),
        f.session_subnets(du_conf),
        f.session_subnets(ru_conf),
    ];
    for (i, a) in subnet_sets.iter().enumerate() {
        for b in &subnet_sets[i + 1..] {
            assert!(a.is_disjoint(b));
        }
    }

    // All intents realized, no cross-tenant exposure.
    for s in [e2e, du_conf, ru_conf] {
        f.verify(s);
        let session = &f.engine.state().sessions[&s];
        assert_eq!(session.state, SessionState::Active);
        let report = session.report.as_ref().unwrap();
        assert!(report.passed(), "report: {report:?}");
    }
    f.engine.state().check_invariants().unwrap();
}

#[test]
fn provision_is_idempotent_on_provisioned_sessions() {
    let mut f = fig3_facility();
    let (e2e, _, _) = f.plan_fig3_sessions();
    f.provision(e2e);
    let before = f.engine.state_hash();
    let vids = f.session_vids(e2e);
    match run(&mut f.engine, Command::ProvisionSession { session: e2e }) {
        Output::Session(doc) => {
            let again: BTreeSet<u16> = doc
                .session
                .allocations
                .as_ref()
                .unwrap()
                .vids
                .values()
                .copied()
                .collect();
            assert_eq!(again, vids);
        }
        other => panic!("unexpected output {other:?}"),
    }
    assert_eq!(f.engine.state_hash(), before);
}

#[test]
fn teardown_restores_allocator_fingerprint() {
    let mut f = fig3_facility();
    let baseline = f.engine.state().allocator_fingerprint();
    let (e2e, du_conf, ru_conf) = f.plan_fig3_sessions();
    for s in [e2e, du_conf, ru_conf] {
        f.provision(s);
    }
    assert_ne!(f.engine.state().allocator_fingerprint(), baseline);
    for s in [e2e, du_conf, ru_conf] {
        f.teardown(s);
    }
    // Oracle: snapshot-hash comparison against the pre-provision state.
    assert_eq!(f.engine.state().allocator_fingerprint(), baseline);
    assert_eq!(f.engine.state().vlans.active_count(), 0);
    f.engine.state().check_invariants().unwrap();
}

#[test]
fn teardown_twice_is_an_error() {
    let mut f = fig3_facility();
    let (e2e, _, _) = f.plan_fig3_sessions();
    f.provision(e2e);
    f.teardown(e2e);
    let err = f
        .engine
        .execute(Command::TeardownSession { session: e2e })
        .unwrap_err();
    assert_eq!(err, EngineError::AlreadyTornDown(e2e));
}

#[test]
fn shared_trunk_keeps_other_sessions_vids_after_teardown() {
    let mut f = fig3_facility();
    let (e2e, du_conf, ru_conf) = f.plan_fig3_sessions();
    for s in [e2e, du_conf, ru_conf] {
        f.provision(s);
    }
    // Both the E2E fronthaul and the RU-conformance fronthaul cross the
    // inter-site trunk.
    let trunk_vids = |f: &common::Facility| -> BTreeSet<u16> {
        f.engine
            .state()
            .port_table()
            .values()
            .filter_map(|cfg| {
                f.engine
                    .state()
                    .inventory
                    .link_of(cfg.port)
                    .filter(|l| l.kind == otic_core::inventory::LinkKind::Trunk)
                    .map(|_| cfg.mode.vids())
            })
            .flatten()
            .collect()
    };
    let before = trunk_vids(&f);
    let e2e_vids = f.session_vids(e2e);
    let ru_vids = f.session_vids(ru_conf);
    assert!(before.is_superset(&ru_vids));
    f.teardown(e2e);
    let after = trunk_vids(&f);
    // Oracle: set difference removes exactly the torn-down session's VIDs.
    let expected: BTreeSet<u16> = before.difference(&e2e_vids).copied().collect();
    assert_eq!(after, expected);
    assert!(after.is_superset(&ru_vids));
}

#[test]
fn device_exclusivity_blocks_double_provisioning() {
    let mut f = fig3_facility();
    let (e2e, _, _) = f.plan_fig3_sessions();
    // A second draft over tenant 1's DU is fine to plan...
    let second = f.plan_session(
        SessionKind::DuConformance,
        [f.t1],
        vec![f.du1, f.ru_ue_emu, f.core_emu2],
        SessionOptions::default(),
    );
    f.provision(e2e);
    // ...but cannot be provisioned while the first session holds the DU.
    let err = f
        .engine
        .execute(Command::ProvisionSession { session: second })
        .unwrap_err();
    assert_eq!(
        err,
        EngineError::DeviceBusy {
            device: f.du1,
            held_by: e2e
        }
    );
    // After teardown the device frees up.
    f.teardown(e2e);
    f.provision(second);
}

#[test]
fn provision_conflict_rolls_back_completely() {
    let mut f = fig3_facility();
    let (e2e, _, _) = f.plan_fig3_sessions();
    f.provision(e2e);
    // A session over devices already held: the engine allocates VIDs and
    // subnets only after the claim check, but whatever order applies, a
    // failed provision must leave the committed state untouched.
    let clash = f.plan_session(
        SessionKind::DuConformance,
        [f.t1],
        vec![f.du1, f.ru_ue_emu, f.core_emu2],
        SessionOptions::default(),
    );
    let fp_before = f.engine.state().allocator_fingerprint();
    let hash_before = f.engine.state_hash();
    let err = f
        .engine
        .execute(Command::ProvisionSession { session: clash })
        .unwrap_err();
    assert!(matches!(err, EngineError::DeviceBusy { .. }));
    // Oracle: state-snapshot comparison; nothing may have leaked.
    assert_eq!(f.engine.state().allocator_fingerprint(), fp_before);
    assert_eq!(f.engine.state_hash(), hash_before);
}

#[test]
fn tampered_trunk_config_fails_intent_and_marks_session_failed() {
    let mut f = fig3_facility();
    let (e2e, _, _) = f.plan_fig3_sessions();
    f.provision(e2e);
    f.verify(e2e);
    assert_eq!(f.engine.state().sessions[&e2e].state, SessionState::Active);

    // Tamper: drop the session's fronthaul VID from the trunk ports it
    // crosses, then re-verify.
    let fh_vid = f.vid_of(e2e, InterfaceKind::OfhCu);
    let mut state = f.engine.state().clone();
    let trunk_ports: Vec<_> = {
        let inv = &state.inventory;
        state.sessions[&e2e]
            .allocations
            .as_ref()
            .unwrap()
            .port_vids
            .keys()
            .copied()
            .filter(|p| inv.link_of(*p).is_some_and(|l| l.kind == otic_core::inventory::LinkKind::Trunk))
            .collect()
    };
    assert!(!trunk_ports.is_empty(), "fronthaul must cross the trunk");
    let alloc = state
        .sessions
        .get_mut(&e2e)
        .unwrap()
        .allocations
        .as_mut()
        .unwrap();
    for p in &trunk_ports {
        alloc.port_vids.get_mut(p).unwrap().remove(&fh_vid);
    }
    let report = state.verify_session(e2e).unwrap();
    assert!(!report.intent_passed());
    assert!(report.isolation_passed());
    assert_eq!(state.sessions[&e2e].state, SessionState::Failed);
}

#[test]
fn cross_tenant_probes_are_unreachable_on_every_active_vid() {
    let mut f = fig3_facility();
    let (e2e, du_conf, ru_conf) = f.plan_fig3_sessions();
    for s in [e2e, du_conf, ru_conf] {
        f.provision(s);
    }
    let state = f.engine.state();
    let fabric_model = state.current_fabric().unwrap();
    let owner_of = |d| state.inventory.device(d).unwrap().owner;
    let duts = [f.ru0, f.du1, f.cu1, f.du2, f.ru1];
    let vids: Vec<u16> = state.vlans.active_vids().collect();
    for (i, a) in duts.iter().enumerate() {
        for b in &duts[i + 1..] {
            if owner_of(*a) == owner_of(*b) {
                continue;
            }
            for pa in f.engine.engine_device_ports(*a) {
                for pb in f.engine.engine_device_ports(*b) {
                    if state.inventory.port(pa).unwrap().medium != PortMedium::Ethernet
                        || state.inventory.port(pb).unwrap().medium != PortMedium::Ethernet
                    {
                        continue;
                    }
                    for vid in &vids {
                        assert!(
                            !fabric::l2_reachable(&fabric_model, pa, pb, *vid).unwrap(),
                            "cross-tenant leak: {pa} <-> {pb} on VID {vid}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn multi_tenant_iot_session_grants_cover_shared_vids() {
    let mut f = fig3_facility();
    let (t1, t2) = (f.t1, f.t2);
    let dc = f.engine.state().inventory.sites().next().unwrap().id;
    let lab = f.engine.state().inventory.sites().nth(1).unwrap().id;
    let sw1 = f.engine.state().inventory.switches().next().unwrap().id;
    let sw2 = f.engine.state().inventory.switches().nth(1).unwrap().id;

    // A tenant-1 DU and a tenant-2 RU with compatible feature sets, plus a
    // dedicated UE emulator for the radio side.
    let features_du = otic_core::features::FeatureSet::from_iter([
        ("bandwidth_mhz", vec!["100"]),
        ("scs_khz", vec!["30"]),
        ("plane_s_source", vec!["du", "tgm"]),
    ]);
    let features_ru = otic_core::features::FeatureSet::from_iter([
        ("bandwidth_mhz", vec!["100", "40"]),
        ("scs_khz", vec!["30"]),
        ("plane_s_source", vec!["du"]),
    ]);
    let register = |f: &mut common::Facility, site, owner, role, kind, ports, features| {
        match run(&mut f.engine, Command::RegisterDevice {
            site,
            owner,
            role,
            kind,
            ports,
            features,
        }) {
            Output::Device(d) => d,
            other => panic!("unexpected {other:?}"),
        }
    };
    let du_b = register(
        &mut f,
        dc,
        Owner::Tenant(t1),
        DeviceRole::Dut,
        DeviceKind::Du,
        vec![PortSpec::eth("eth0", 25), PortSpec::eth("eth1", 25)],
        features_du.clone(),
    );
    let ru_b = register(
        &mut f,
        lab,
        Owner::Tenant(t2),
        DeviceRole::Dut,
        DeviceKind::Ru,
        vec![
            PortSpec::eth("fh0", 25),
            PortSpec::new("rf0", PortMedium::RfCoaxial, 0),
        ],
        features_ru,
    );
    let ue_b = register(
        &mut f,
        lab,
        Owner::Otic,
        DeviceRole::Te,
        DeviceKind::UeEmulator,
        vec![PortSpec::new("rf0", PortMedium::RfCoaxial, 0)],
        Default::default(),
    );
    // Wire the new gear: du_b on sw1 ports 12/13, ru_b on sw2 port 2.
    let wire = |f: &mut common::Facility, a, b| {
        run(&mut f.engine, Command::AddLink {
            a,
            b,
            kind: otic_core::inventory::LinkKind::Access,
        });
    };
    let sp = |f: &common::Facility, sw, i: usize| {
        f.engine.state().inventory.switch(sw).unwrap().ports[i].id
    };
    let du_b_ports = f.engine.engine_device_ports(du_b);
    let ru_b_ports = f.engine.engine_device_ports(ru_b);
    let ue_b_rf = f.engine.engine_device_ports(ue_b)[0];
    let (sw1_p12, sw1_p13, sw2_p2) = (sp(&f, sw1, 12), sp(&f, sw1, 13), sp(&f, sw2, 2));
    wire(&mut f, du_b_ports[0], sw1_p12);
    wire(&mut f, du_b_ports[1], sw1_p13);
    wire(&mut f, ru_b_ports[0], sw2_p2);
    run(&mut f.engine, Command::AddLink {
        a: ue_b_rf,
        b: ru_b_ports[1],
        kind: otic_core::inventory::LinkKind::Analog,
    });

    let mut options = SessionOptions::default();
    options.splane_source = Some(otic_core::topology::SplaneSource::Device(du_b));
    let iot = f.plan_session(
        SessionKind::Wg4Iot,
        [f.t1, f.t2],
        vec![du_b, ru_b, ue_b, f.core_sim],
        options,
    );
    // The stored profile is the feature intersection.
    let profile = f.engine.state().sessions[&iot].iot_profile.clone().unwrap();
    assert_eq!(
        profile.common.get("bandwidth_mhz").unwrap(),
        &std::collections::BTreeSet::from(["100".to_string()])
    );

    f.provision(iot);
    f.verify(iot);
    let session = &f.engine.state().sessions[&iot];
    assert_eq!(session.state, SessionState::Active);
    assert!(session.report.as_ref().unwrap().passed());

    // Grant-filtering oracle: the same fabric scanned without the grants
    // must flag the cross-tenant fronthaul VIDs, with them it is clean.
    let state = f.engine.state();
    let fabric_model = state.current_fabric().unwrap();
    let ungranted =
        fabric::verify_isolation(&fabric_model, &state.ownership(), &[]).unwrap();
    assert!(!ungranted.isolation_passed());
    let granted =
        fabric::verify_isolation(&fabric_model, &state.ownership(), &state.grants()).unwrap();
    assert!(granted.isolation_passed());
}

#[test]
fn incompatible_iot_profile_blocks_session_planning() {
    let mut f = fig3_facility();
    let (t1, t2) = (f.t1, f.t2);
    let dc = f.engine.state().inventory.sites().next().unwrap().id;
    let lab = f.engine.state().inventory.sites().nth(1).unwrap().id;
    let mk = |f: &mut common::Facility, site, owner, kind, ports, features| {
        match run(&mut f.engine, Command::RegisterDevice {
            site,
            owner,
            role: DeviceRole::Dut,
            kind,
            ports,
            features,
        }) {
            Output::Device(d) => d,
            other => panic!("unexpected {other:?}"),
        }
    };
    let du_b = mk(
        &mut f,
        dc,
        Owner::Tenant(t1),
        DeviceKind::Du,
        vec![PortSpec::eth("eth0", 25)],
        otic_core::features::FeatureSet::from_iter([
            ("bandwidth_mhz", vec!["100"]),
            ("scs_khz", vec!["30"]),
            ("plane_s_source", vec!["du"]),
        ]),
    );
    let ru_b = mk(
        &mut f,
        lab,
        Owner::Tenant(t2),
        DeviceKind::Ru,
        vec![
            PortSpec::eth("fh0", 25),
            PortSpec::new("rf0", PortMedium::RfCoaxial, 0),
        ],
        otic_core::features::FeatureSet::from_iter([
            ("bandwidth_mhz", vec!["40"]),
            ("scs_khz", vec!["30"]),
            ("plane_s_source", vec!["du"]),
        ]),
    );
    let err = f
        .engine
        .execute(Command::PlanSession {
            kind: SessionKind::Wg4Iot,
            tenants: BTreeSet::from([f.t1, f.t2]),
            participants: vec![du_b, ru_b, f.ue_sim, f.core_sim],
            options: SessionOptions::default(),
        })
        .unwrap_err();
    assert_eq!(
        err,
        EngineError::Topology(otic_core::topology::TopologyError::IncompatibleProfile {
            key: "bandwidth_mhz".into()
        })
    );
}

#[test]
fn vid_exhaustion_mid_provision_leaves_no_partial_allocations() {
    // Small-scale injected exhaustion: fill the VID pool down to fewer ids
    // than the session needs, then provision and watch it roll back.
    let mut f = fig3_facility();
    let (e2e, _, _) = f.plan_fig3_sessions();
    // Burn VIDs with scratch wg5 sessions? Too heavy. Drive the state
    // directly through apply_command on a clone: the engine API stays
    // clean and the rollback property is what matters here.
    let mut state = f.engine.state().clone();
    // e2e needs 4 VIDs; leave only 2 free.
    let mut burner = otic_core::vlan::VidPurpose {
        interface: InterfaceKind::F1,
        session: otic_core::SessionId(9999),
        plane: None,
    };
    let total = otic_core::vlan::VID_CAPACITY as u32;
    for i in 0..(total - 2) {
        burner.session = otic_core::SessionId(100_000 + i);
        state.vlans.allocate(burner).unwrap();
    }
    let fingerprint = state.allocator_fingerprint();
    let hash = state.state_hash();
    let mut scratch = state.clone();
    let err = otic_core::engine::apply_command(
        &mut scratch,
        &Command::ProvisionSession { session: e2e },
    )
    .unwrap_err();
    assert_eq!(err, EngineError::Vlan(otic_core::vlan::VlanError::Exhausted));
    // The scratch copy is dirty (that is why the engine clones), but the
    // committed state is untouched.
    assert_eq!(state.allocator_fingerprint(), fingerprint);
    assert_eq!(state.state_hash(), hash);
    // And the engine path drops the dirty clone entirely.
    assert!(state.vlans.active_vids().count() as u32 >= total - 2);
}
