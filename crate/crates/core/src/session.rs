//! Test-session lifecycle: plan, provision, verify, teardown.
//!
//! Provisioning is all-or-nothing: the engine applies every mutation to a
//! scratch copy of the state and commits only on success, so a mid-flight
//! exhaustion leaves no partial allocations behind. Port configurations are
//! derived from the live sessions' recorded contributions, which makes
//! teardown a matter of dropping one session's records.

use std::collections::{BTreeMap, BTreeSet};

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, EngineState};
use crate::fabric::{self, PortConfig, PortMode, SharedGrant, VerificationReport};
use crate::ids::{DeviceId, PortId, SessionId, SwitchId, TenantId};
use crate::inventory::{Inventory, LinkKind, Owner, PortOwner};
use crate::ipam::InterfaceKind;
use crate::topology::{
    compile, match_iot_profile, IotProfile, LogicalTopology, PlaneChecklist, PlaneStep,
    SessionKind, SessionOptions,
};
use crate::vlan::VidPurpose;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tenant {
    pub id: TenantId,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Draft,
    Provisioned,
    Active,
    Failed,
    TornDown,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionAllocations {
    /// One VID per digital interface class in the topology.
    pub vids: BTreeMap<InterfaceKind, u16>,
    /// One /29 per interface that owns a data network.
    pub subnets: BTreeMap<InterfaceKind, Ipv4Net>,
    /// VIDs this session contributes to each port (device ports and the
    /// switch ports along provisioned paths).
    pub port_vids: BTreeMap<PortId, BTreeSet<u16>>,
    /// Shared /26 access granted to the session's tenants (Plugfest mode).
    pub shared_subnets: BTreeSet<Ipv4Net>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub kind: SessionKind,
    pub tenants: BTreeSet<TenantId>,
    pub participants: Vec<DeviceId>,
    pub options: SessionOptions,
    pub state: SessionState,
    pub topology: LogicalTopology,
    pub iot_profile: Option<IotProfile>,
    pub checklist: PlaneChecklist,
    pub allocations: Option<SessionAllocations>,
    pub report: Option<VerificationReport>,
}

impl Session {
    /// Sessions in these states hold VIDs, subnets and port claims.
    pub fn holds_resources(&self) -> bool {
        matches!(
            self.state,
            SessionState::Provisioned | SessionState::Active | SessionState::Failed
        )
    }
}

// ---------------------------------------------------------------------------
// Physical path computation

enum Attachment {
    /// Port wired straight to the peer device port.
    Direct,
    Switch(SwitchId, PortId),
}

fn attachment(
    inventory: &Inventory,
    port: PortId,
    peer: PortId,
) -> Result<Attachment, EngineError> {
    let link = inventory
        .link_of(port)
        .ok_or(EngineError::PortNotWired(port))?;
    if link.kind != LinkKind::Access {
        return Err(EngineError::PortNotWired(port));
    }
    let other = if link.endpoint_a == port {
        link.endpoint_b
    } else {
        link.endpoint_a
    };
    match inventory.port_owner(other) {
        Some(PortOwner::Switch(sw)) => Ok(Attachment::Switch(sw, other)),
        Some(PortOwner::Device(_)) if other == peer => Ok(Attachment::Direct),
        _ => Err(EngineError::NoPath { a: port, b: peer }),
    }
}

/// The switch ports a frame crosses between two device ports: the two
/// device-facing switch ports plus both ends of every trunk hop. Shortest
/// path over the trunk graph, exploring links in ascending id so ties break
/// toward the lowest link id.
pub fn switch_path(
    inventory: &Inventory,
    a: PortId,
    b: PortId,
) -> Result<Vec<PortId>, EngineError> {
    let at_a = attachment(inventory, a, b)?;
    let at_b = attachment(inventory, b, a)?;
    let (sw_a, spa) = match at_a {
        Attachment::Direct => return Ok(Vec::new()),
        Attachment::Switch(sw, sp) => (sw, sp),
    };
    let (sw_b, spb) = match at_b {
        Attachment::Direct => return Err(EngineError::NoPath { a, b }),
        Attachment::Switch(sw, sp) => (sw, sp),
    };
    if sw_a == sw_b {
        return Ok(vec![spa, spb]);
    }
    // Trunk graph: switch -> (peer switch, local trunk port, peer trunk
    // port), in link-id order.
    let mut adjacency: BTreeMap<SwitchId, Vec<(SwitchId, PortId, PortId)>> = BTreeMap::new();
    for link in inventory.links() {
        if link.kind != LinkKind::Trunk {
            continue;
        }
        if let (Some(PortOwner::Switch(x)), Some(PortOwner::Switch(y))) = (
            inventory.port_owner(link.endpoint_a),
            inventory.port_owner(link.endpoint_b),
        ) {
            adjacency
                .entry(x)
                .or_default()
                .push((y, link.endpoint_a, link.endpoint_b));
            adjacency
                .entry(y)
                .or_default()
                .push((x, link.endpoint_b, link.endpoint_a));
        }
    }
    let mut parent: BTreeMap<SwitchId, (SwitchId, PortId, PortId)> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::from([sw_a]);
    let mut seen = BTreeSet::from([sw_a]);
    while let Some(sw) = queue.pop_front() {
        if sw == sw_b {
            break;
        }
        for (next, out_port, in_port) in adjacency.get(&sw).into_iter().flatten() {
            if seen.insert(*next) {
                parent.insert(*next, (sw, *out_port, *in_port));
                queue.push_back(*next);
            }
        }
    }
    if !seen.contains(&sw_b) {
        return Err(EngineError::NoPath { a, b });
    }
    let mut trunk_hops: Vec<(PortId, PortId)> = Vec::new();
    let mut cursor = sw_b;
    while cursor != sw_a {
        let (prev, out_port, in_port) = parent[&cursor];
        trunk_hops.push((out_port, in_port));
        cursor = prev;
    }
    trunk_hops.reverse();
    let mut ports = vec![spa];
    for (out_port, in_port) in trunk_hops {
        ports.push(out_port);
        ports.push(in_port);
    }
    ports.push(spb);
    Ok(ports)
}

// ---------------------------------------------------------------------------
// Lifecycle operations on the engine state

impl EngineState {
    pub fn create_tenant(&mut self, name: &str) -> Result<TenantId, EngineError> {
        if self.tenants.values().any(|t| t.name == name) {
            return Err(EngineError::DuplicateTenantName(name.to_string()));
        }
        let plan = self.plan.as_mut().ok_or(EngineError::NoPlan)?;
        let id = TenantId(self.next_tenant);
        plan.allocate_tenant_block(id)?;
        plan.carve_tenant_subnets(id)?;
        self.next_tenant += 1;
        self.tenants.insert(
            id,
            Tenant {
                id,
                name: name.to_string(),
            },
        );
        Ok(id)
    }

    pub fn delete_tenant(&mut self, tenant: TenantId) -> Result<(), EngineError> {
        if !self.tenants.contains_key(&tenant) {
            return Err(EngineError::UnknownTenant(tenant));
        }
        let blocked = self
            .sessions
            .values()
            .any(|s| s.tenants.contains(&tenant) && s.state != SessionState::TornDown);
        if blocked {
            return Err(EngineError::TenantHasSessions(tenant));
        }
        if let Some(plan) = self.plan.as_mut() {
            if plan.tenant_block(tenant).is_some() {
                plan.release_tenant_block(tenant)?;
            }
        }
        self.tenants.remove(&tenant);
        Ok(())
    }

    pub fn plan_session(
        &mut self,
        kind: SessionKind,
        tenants: BTreeSet<TenantId>,
        participants: Vec<DeviceId>,
        options: SessionOptions,
    ) -> Result<SessionId, EngineError> {
        for t in &tenants {
            if !self.tenants.contains_key(t) {
                return Err(EngineError::UnknownTenant(*t));
            }
        }
        let mut participants = participants;
        participants.sort();
        participants.dedup();
        for d in &participants {
            let device = self
                .inventory
                .device(*d)
                .ok_or(EngineError::UnknownDevice(*d))?;
            if device.role == crate::inventory::DeviceRole::Dut {
                let owner = device.owner.tenant().expect("DUT invariant");
                if !tenants.contains(&owner) {
                    return Err(EngineError::DutOwnerNotInSession {
                        device: *d,
                        owner,
                    });
                }
            }
        }
        let iot_profile = if kind == SessionKind::Wg4Iot {
            let find = |k: crate::inventory::DeviceKind| {
                participants.iter().find_map(|d| {
                    let dev = self.inventory.device(*d)?;
                    (dev.kind == k && dev.role == crate::inventory::DeviceRole::Dut)
                        .then_some(dev)
                })
            };
            match (find(crate::inventory::DeviceKind::Du), find(crate::inventory::DeviceKind::Ru))
            {
                (Some(du), Some(ru)) => {
                    Some(match_iot_profile(&du.features, &ru.features)?)
                }
                // Missing roles surface as template errors in compile.
                _ => None,
            }
        } else {
            None
        };
        let topology = compile(&self.inventory, kind, &participants, &options)?;
        let id = SessionId(self.next_session);
        self.next_session += 1;
        self.sessions.insert(
            id,
            Session {
                id,
                kind,
                tenants,
                participants,
                options,
                state: SessionState::Draft,
                topology,
                iot_profile,
                checklist: PlaneChecklist::new(),
                allocations: None,
                report: None,
            },
        );
        Ok(id)
    }

    /// Device -> holding session, over sessions that currently own resources.
    pub fn device_claims(&self) -> BTreeMap<DeviceId, SessionId> {
        let mut claims = BTreeMap::new();
        for session in self.sessions.values().filter(|s| s.holds_resources()) {
            for d in &session.participants {
                claims.insert(*d, session.id);
            }
        }
        claims
    }

    pub fn provision_session(&mut self, id: SessionId) -> Result<(), EngineError> {
        let session = self
            .sessions
            .get(&id)
            .ok_or(EngineError::UnknownSession(id))?;
        match session.state {
            // Re-provisioning an already-provisioned session is a no-op.
            SessionState::Provisioned | SessionState::Active => return Ok(()),
            SessionState::Draft => {}
            state => {
                return Err(EngineError::InvalidSessionState {
                    session: id,
                    state,
                    op: "provision",
                })
            }
        }
        let claims = self.device_claims();
        for d in &session.participants {
            if let Some(holder) = claims.get(d) {
                return Err(EngineError::DeviceBusy {
                    device: *d,
                    held_by: *holder,
                });
            }
        }

        let session = self.sessions.get(&id).expect("checked").clone();
        let interfaces = session.topology.interfaces();

        let mut vids: BTreeMap<InterfaceKind, u16> = BTreeMap::new();
        for interface in &interfaces {
            let vid = self.vlans.allocate(VidPurpose {
                interface: *interface,
                session: id,
                plane: None,
            })?;
            vids.insert(*interface, vid);
        }

        let mut subnets: BTreeMap<InterfaceKind, Ipv4Net> = BTreeMap::new();
        let mut shared_subnets: BTreeSet<Ipv4Net> = BTreeSet::new();
        let l3_interfaces: Vec<InterfaceKind> = interfaces
            .iter()
            .copied()
            .filter(|i| i.has_subnet())
            .collect();
        if !l3_interfaces.is_empty() {
            let plan = self.plan.as_mut().ok_or(EngineError::NoPlan)?;
            for interface in &l3_interfaces {
                subnets.insert(*interface, plan.allocate_test_subnet(*interface, id)?);
                if session.options.shared {
                    shared_subnets.insert(plan.shared_subnet(*interface)?);
                }
            }
        }

        let mut port_vids: BTreeMap<PortId, BTreeSet<u16>> = BTreeMap::new();
        for edge in &session.topology.digital_edges {
            let vid = vids[&edge.interface];
            port_vids.entry(edge.a).or_default().insert(vid);
            port_vids.entry(edge.b).or_default().insert(vid);
            for sp in switch_path(&self.inventory, edge.a, edge.b)? {
                port_vids.entry(sp).or_default().insert(vid);
            }
        }

        let session = self.sessions.get_mut(&id).expect("checked");
        session.allocations = Some(SessionAllocations {
            vids,
            subnets,
            port_vids,
            shared_subnets,
        });
        session.state = SessionState::Provisioned;
        Ok(())
    }

    /// Derive the full port-configuration table from the sessions that hold
    /// resources. Ports on trunk cabling are trunk-mode; device-facing ports
    /// are access-mode unless they stack several VLANs.
    pub fn port_table(&self) -> BTreeMap<PortId, PortConfig> {
        let mut vids_by_port: BTreeMap<PortId, BTreeSet<u16>> = BTreeMap::new();
        for session in self.sessions.values().filter(|s| s.holds_resources()) {
            if let Some(alloc) = &session.allocations {
                for (port, vids) in &alloc.port_vids {
                    vids_by_port.entry(*port).or_default().extend(vids);
                }
            }
        }
        vids_by_port
            .into_iter()
            .map(|(port, vids)| {
                let on_trunk_link = self
                    .inventory
                    .link_of(port)
                    .is_some_and(|l| l.kind == LinkKind::Trunk);
                let mode = if !on_trunk_link && vids.len() == 1 {
                    PortMode::Access(*vids.iter().next().expect("non-empty"))
                } else {
                    PortMode::Trunk(vids)
                };
                (port, PortConfig {
                    port,
                    mode,
                    oob: false,
                })
            })
            .collect()
    }

    /// Sharing exemptions derived from the live sessions: a multi-tenant
    /// session's tenants may meet on its VIDs and subnets; Plugfest-mode
    /// sessions extend that to the shared /26s.
    pub fn grants(&self) -> Vec<SharedGrant> {
        self.sessions
            .values()
            .filter(|s| s.holds_resources())
            .filter_map(|s| {
                let alloc = s.allocations.as_ref()?;
                let mut subnets: BTreeSet<Ipv4Net> = alloc.subnets.values().copied().collect();
                subnets.extend(&alloc.shared_subnets);
                Some(SharedGrant {
                    session: s.id,
                    tenants: s.tenants.clone(),
                    vids: alloc.vids.values().copied().collect(),
                    subnets,
                })
            })
            .collect()
    }

    pub fn active_vid_set(&self) -> BTreeSet<u16> {
        self.vlans.active_vids().collect()
    }

    /// Build the fabric model for the engine's current provisioned state.
    pub fn current_fabric(&self) -> Result<fabric::FabricModel, EngineError> {
        let configs: Vec<PortConfig> = self.port_table().into_values().collect();
        let known = self
            .plan
            .as_ref()
            .map(|p| p.known_subnets())
            .unwrap_or_default();
        Ok(fabric::build_fabric(
            &self.inventory,
            &configs,
            &self.active_vid_set(),
            known,
        )?)
    }

    pub fn ownership(&self) -> BTreeMap<DeviceId, Owner> {
        self.inventory.devices().map(|d| (d.id, d.owner)).collect()
    }

    /// Run intent and isolation verification for one session against the
    /// live fabric. Pass moves the session to `active`, any failure to
    /// `failed`; the report is retained either way.
    pub fn verify_session(&mut self, id: SessionId) -> Result<VerificationReport, EngineError> {
        let session = self
            .sessions
            .get(&id)
            .ok_or(EngineError::UnknownSession(id))?;
        if !session.holds_resources() {
            return Err(EngineError::InvalidSessionState {
                session: id,
                state: session.state,
                op: "verify",
            });
        }
        let alloc = session.allocations.clone().expect("holding session");
        let topology = session.topology.clone();
        let fabric_model = self.current_fabric()?;
        let intent = fabric::verify_intent(&fabric_model, &self.inventory, &topology, &alloc.vids)?;
        let isolation =
            fabric::verify_isolation(&fabric_model, &self.ownership(), &self.grants())?;
        let report = intent.merge(isolation);
        let session = self.sessions.get_mut(&id).expect("checked");
        session.state = if report.passed() {
            SessionState::Active
        } else {
            SessionState::Failed
        };
        session.report = Some(report.clone());
        Ok(report)
    }

    /// Facility-wide check: every holding session's intent plus one global
    /// isolation sweep. Read-only.
    pub fn verify_all(&self) -> Result<VerificationReport, EngineError> {
        let fabric_model = self.current_fabric()?;
        let mut report = fabric::verify_isolation(&fabric_model, &self.ownership(), &self.grants())?;
        for session in self.sessions.values().filter(|s| s.holds_resources()) {
            let alloc = session.allocations.as_ref().expect("holding session");
            let intent = fabric::verify_intent(
                &fabric_model,
                &self.inventory,
                &session.topology,
                &alloc.vids,
            )?;
            report = report.merge(intent);
        }
        Ok(report)
    }

    pub fn teardown_session(&mut self, id: SessionId) -> Result<(), EngineError> {
        let session = self
            .sessions
            .get(&id)
            .ok_or(EngineError::UnknownSession(id))?;
        match session.state {
            SessionState::TornDown => return Err(EngineError::AlreadyTornDown(id)),
            SessionState::Draft => {
                return Err(EngineError::InvalidSessionState {
                    session: id,
                    state: SessionState::Draft,
                    op: "teardown",
                })
            }
            _ => {}
        }
        let session = self.sessions.get_mut(&id).expect("checked");
        let alloc = session.allocations.take().expect("holding session");
        session.state = SessionState::TornDown;
        for vid in alloc.vids.values() {
            // This session's port references die with it; no other session
            // may reference its VIDs.
            self.vlans.release(*vid, &|_| false)?;
        }
        if let Some(plan) = self.plan.as_mut() {
            plan.release_session_blocks(id);
        }
        Ok(())
    }

    pub fn advance_plane(
        &mut self,
        id: SessionId,
        plane: PlaneStep,
        passed: bool,
    ) -> Result<(), EngineError> {
        let session = self
            .sessions
            .get_mut(&id)
            .ok_or(EngineError::UnknownSession(id))?;
        if !matches!(
            session.state,
            SessionState::Provisioned | SessionState::Active
        ) {
            return Err(EngineError::InvalidSessionState {
                session: id,
                state: session.state,
                op: "advance_plane",
            });
        }
        session.checklist.advance(plane, passed)?;
        Ok(())
    }
}
