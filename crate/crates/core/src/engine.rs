//! The transactional engine: one serialized writer over the whole facility
//! state.
//!
//! Every mutation is a [`Command`]. Execution applies the command to a
//! scratch clone of the state and swaps it in only on success, so failures
//! of any kind roll back completely. Successful commands append to the
//! journal before the swap becomes visible, keeping persistence synchronous
//! with commit.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fabric::FabricError;
use crate::features::FeatureSet;
use crate::ids::{DeviceId, LinkId, PortId, SessionId, SiteId, SwitchId, TenantId};
use crate::inventory::{
    ClockRole, DeviceKind, DeviceRole, Inventory, InventoryDoc, InventoryError, LinkKind, Owner,
    PortSpec, SiteKind,
};
use crate::ipam::{AddressPlan, InterfaceKind, IpamError, OticNet};
use crate::journal::{JournalWriter, PersistError, Persistence};
use crate::session::{Session, SessionState, Tenant};
use crate::topology::{PlaneStep, SessionKind, SessionOptions, TopologyError};
use crate::vlan::{VlanError, VlanPool};

pub const STATE_VERSION: u32 = 1;
/// Full-state snapshot cadence, in committed commands.
pub const SNAPSHOT_INTERVAL: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Ipam(#[from] IpamError),
    #[error(transparent)]
    Vlan(#[from] VlanError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("no address plan initialized")]
    NoPlan,
    #[error("address plan already initialized")]
    PlanAlreadyInitialized,
    #[error("tenant name `{0}` already registered")]
    DuplicateTenantName(String),
    #[error("unknown tenant {0}")]
    UnknownTenant(TenantId),
    #[error("tenant {0} still has sessions that are not torn down")]
    TenantHasSessions(TenantId),
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("session {session} is {state:?}; cannot {op}")]
    InvalidSessionState {
        session: SessionId,
        state: SessionState,
        op: &'static str,
    },
    #[error("session {0} is already torn down")]
    AlreadyTornDown(SessionId),
    #[error("device {device} is held by session {held_by}")]
    DeviceBusy {
        device: DeviceId,
        held_by: SessionId,
    },
    #[error("DUT {device} belongs to tenant {owner}, which is not part of the session")]
    DutOwnerNotInSession { device: DeviceId, owner: TenantId },
    #[error("port {0} has no usable access cabling")]
    PortNotWired(PortId),
    #[error("no trunk path between ports {a} and {b}")]
    NoPath { a: PortId, b: PortId },
    #[error("inventory import requires an empty inventory")]
    InventoryNotEmpty,
    #[error("persistence failure: {0}")]
    Persist(String),
}

impl From<PersistError> for EngineError {
    fn from(e: PersistError) -> Self {
        EngineError::Persist(e.to_string())
    }
}

/// Coarse classification used for exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    NotFound,
    Conflict,
    Exhausted,
    TemplateViolation,
    Internal,
}

impl EngineError {
    pub fn class(&self) -> ErrorClass {
        match self {
            EngineError::Ipam(IpamError::TenantPoolExhausted)
            | EngineError::Ipam(IpamError::TestSpaceExhausted(_))
            | EngineError::Vlan(VlanError::Exhausted) => ErrorClass::Exhausted,
            EngineError::Topology(_) => ErrorClass::TemplateViolation,
            EngineError::UnknownTenant(_)
            | EngineError::UnknownDevice(_)
            | EngineError::UnknownSession(_)
            | EngineError::Inventory(InventoryError::UnknownSite(_))
            | EngineError::Inventory(InventoryError::UnknownPort(_))
            | EngineError::Ipam(IpamError::UnknownSubnet(_))
            | EngineError::Ipam(IpamError::UnknownAllocation(_)) => ErrorClass::NotFound,
            EngineError::DeviceBusy { .. }
            | EngineError::PlanAlreadyInitialized
            | EngineError::DuplicateTenantName(_)
            | EngineError::TenantHasSessions(_)
            | EngineError::InvalidSessionState { .. }
            | EngineError::AlreadyTornDown(_)
            | EngineError::InventoryNotEmpty
            | EngineError::Inventory(InventoryError::DuplicateSiteName(_))
            | EngineError::Inventory(InventoryError::DuplicatePortName(_))
            | EngineError::Inventory(InventoryError::PortOccupied(..))
            | EngineError::Ipam(IpamError::AlreadyCarved(_))
            | EngineError::Ipam(IpamError::TenantHasBlock(_))
            | EngineError::Ipam(IpamError::StillReferenced(..))
            | EngineError::Vlan(VlanError::DuplicatePurpose(_))
            | EngineError::Vlan(VlanError::StillReferenced(_)) => ErrorClass::Conflict,
            EngineError::Persist(_) => ErrorClass::Internal,
            _ => ErrorClass::Usage,
        }
    }
}

// ---------------------------------------------------------------------------
// State

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub version: u32,
    pub inventory: Inventory,
    pub plan: Option<AddressPlan>,
    pub vlans: VlanPool,
    pub tenants: BTreeMap<TenantId, Tenant>,
    pub sessions: BTreeMap<SessionId, Session>,
    pub(crate) next_tenant: u32,
    pub(crate) next_session: u32,
}

impl Default for EngineState {
    fn default() -> Self {
        Self::new()
    }
}

impl EngineState {
    pub fn new() -> Self {
        EngineState {
            version: STATE_VERSION,
            inventory: Inventory::new(),
            plan: None,
            vlans: VlanPool::new(),
            tenants: BTreeMap::new(),
            sessions: BTreeMap::new(),
            next_tenant: 1,
            next_session: 1,
        }
    }

    pub fn tenant_by_name(&self, name: &str) -> Option<&Tenant> {
        self.tenants.values().find(|t| t.name == name)
    }

    /// Canonical content hash of the full state.
    pub fn state_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Hash over allocator-visible state only: the plan with its
    /// allocations, active VIDs, derived port table and device claims.
    /// Torn-down session records do not contribute, so full teardown
    /// restores the pre-provision fingerprint.
    pub fn allocator_fingerprint(&self) -> String {
        let view = (
            &self.plan,
            self.vlans.active_vids().collect::<Vec<u16>>(),
            self.port_table(),
            self.device_claims(),
        );
        let json = serde_json::to_vec(&view).expect("fingerprint serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Cross-module consistency; exercised by replay, fuzzing and the
    /// property suites.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.inventory.check_invariants()?;
        self.vlans.check_invariants()?;
        if let Some(plan) = &self.plan {
            plan.check_invariants()?;
        }
        let mut devices_held: BTreeMap<DeviceId, SessionId> = BTreeMap::new();
        for session in self.sessions.values() {
            match (&session.allocations, session.holds_resources()) {
                (Some(_), true) | (None, false) => {}
                (Some(_), false) => {
                    return Err(format!("session {} retains allocations", session.id))
                }
                (None, true) => {
                    return Err(format!("session {} lacks allocations", session.id))
                }
            }
            if session.holds_resources() {
                for d in &session.participants {
                    if let Some(other) = devices_held.insert(*d, session.id) {
                        return Err(format!(
                            "device {d} held by sessions {other} and {}",
                            session.id
                        ));
                    }
                }
            }
            if let Some(alloc) = &session.allocations {
                for (interface, vid) in &alloc.vids {
                    match self.vlans.purpose_of(*vid) {
                        Some(p) if p.session == session.id && p.interface == *interface => {}
                        _ => {
                            return Err(format!(
                                "session {} VID {vid} not active for it",
                                session.id
                            ))
                        }
                    }
                }
                if let Some(plan) = &self.plan {
                    for subnet in alloc.subnets.values() {
                        if plan.owner_of_test_subnet(*subnet) != Some(session.id) {
                            return Err(format!(
                                "session {} subnet {subnet} not owned by it",
                                session.id
                            ));
                        }
                    }
                }
                for port in alloc.port_vids.keys() {
                    match self.inventory.port(*port) {
                        Some(p) if p.medium.carries_vlans() => {}
                        _ => return Err(format!("configured port {port} is not ethernet")),
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Commands

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    RegisterSite {
        name: String,
        kind: SiteKind,
    },
    RegisterSwitch {
        site: SiteId,
        model: String,
        ports: Vec<PortSpec>,
        clock_role: ClockRole,
    },
    RegisterDevice {
        site: SiteId,
        owner: Owner,
        role: DeviceRole,
        kind: DeviceKind,
        ports: Vec<PortSpec>,
        features: FeatureSet,
    },
    AddLink {
        a: PortId,
        b: PortId,
        kind: LinkKind,
    },
    ImportInventory {
        doc: InventoryDoc,
    },
    InitPlan {
        base: Ipv4Net,
    },
    CreateTenant {
        name: String,
    },
    DeleteTenant {
        tenant: TenantId,
    },
    PlanSession {
        kind: SessionKind,
        tenants: BTreeSet<TenantId>,
        participants: Vec<DeviceId>,
        options: SessionOptions,
    },
    ProvisionSession {
        session: SessionId,
    },
    VerifySession {
        session: SessionId,
    },
    TeardownSession {
        session: SessionId,
    },
    AdvancePlane {
        session: SessionId,
        plane: PlaneStep,
        passed: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Site(SiteId),
    Switch(SwitchId),
    Device(DeviceId),
    Link(LinkId),
    Inventory(InventoryDoc),
    Plan(PlanDoc),
    Tenant(TenantDoc),
    Session(Box<SessionDoc>),
    Unit,
}

/// Apply one command to the state. Callers that need atomicity apply to a
/// clone; this function may leave partial mutations behind on error.
pub fn apply_command(state: &mut EngineState, cmd: &Command) -> Result<Output, EngineError> {
    match cmd {
        Command::RegisterSite { name, kind } => {
            Ok(Output::Site(state.inventory.register_site(name, *kind)?))
        }
        Command::RegisterSwitch {
            site,
            model,
            ports,
            clock_role,
        } => Ok(Output::Switch(state.inventory.register_switch(
            *site,
            model,
            ports,
            *clock_role,
        )?)),
        Command::RegisterDevice {
            site,
            owner,
            role,
            kind,
            ports,
            features,
        } => {
            if let Owner::Tenant(t) = owner {
                if !state.tenants.contains_key(t) {
                    return Err(EngineError::UnknownTenant(*t));
                }
            }
            Ok(Output::Device(state.inventory.register_device(
                *site,
                *owner,
                *role,
                *kind,
                ports,
                features.clone(),
            )?))
        }
        Command::AddLink { a, b, kind } => {
            Ok(Output::Link(state.inventory.add_link(*a, *b, *kind)?))
        }
        Command::ImportInventory { doc } => {
            if !state.inventory.is_empty() {
                return Err(EngineError::InventoryNotEmpty);
            }
            for dev in &doc.devices {
                if let Some(t) = dev.owner.tenant() {
                    if !state.tenants.contains_key(&t) {
                        return Err(EngineError::UnknownTenant(t));
                    }
                }
            }
            state.inventory = Inventory::import(doc.clone())?;
            Ok(Output::Inventory(state.inventory.export()))
        }
        Command::InitPlan { base } => {
            if state.plan.is_some() {
                return Err(EngineError::PlanAlreadyInitialized);
            }
            state.plan = Some(AddressPlan::init(*base)?);
            Ok(Output::Plan(state.plan_doc()?))
        }
        Command::CreateTenant { name } => {
            let id = state.create_tenant(name)?;
            Ok(Output::Tenant(state.tenant_doc(id)?))
        }
        Command::DeleteTenant { tenant } => {
            state.delete_tenant(*tenant)?;
            Ok(Output::Unit)
        }
        Command::PlanSession {
            kind,
            tenants,
            participants,
            options,
        } => {
            let id =
                state.plan_session(*kind, tenants.clone(), participants.clone(), options.clone())?;
            Ok(Output::Session(Box::new(state.session_doc(id)?)))
        }
        Command::ProvisionSession { session } => {
            state.provision_session(*session)?;
            Ok(Output::Session(Box::new(state.session_doc(*session)?)))
        }
        Command::VerifySession { session } => {
            state.verify_session(*session)?;
            Ok(Output::Session(Box::new(state.session_doc(*session)?)))
        }
        Command::TeardownSession { session } => {
            state.teardown_session(*session)?;
            Ok(Output::Session(Box::new(state.session_doc(*session)?)))
        }
        Command::AdvancePlane {
            session,
            plane,
            passed,
        } => {
            state.advance_plane(*session, *plane, *passed)?;
            Ok(Output::Session(Box::new(state.session_doc(*session)?)))
        }
    }
}

// ---------------------------------------------------------------------------
// Exported documents

pub const DOC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetEntry {
    pub name: String,
    pub subnet: Ipv4Net,
    pub routable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantBlockEntry {
    pub tenant: TenantId,
    pub block: Ipv4Net,
    pub management: Option<Ipv4Net>,
    pub oob: Option<Ipv4Net>,
    pub vpn: Option<Ipv4Net>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestBlockEntry {
    pub subnet: Ipv4Net,
    pub session: SessionId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataNetEntry {
    pub interface: InterfaceKind,
    pub subnet: Ipv4Net,
    pub routable: bool,
    pub shared: Ipv4Net,
    pub test_blocks: Vec<TestBlockEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub version: u32,
    pub base_prefix: Ipv4Net,
    pub fixed_nets: Vec<NetEntry>,
    pub tenant_blocks: Vec<TenantBlockEntry>,
    pub data_net_allocations: Vec<DataNetEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantDoc {
    pub version: u32,
    pub id: TenantId,
    pub name: String,
    pub block: Ipv4Net,
    pub management: Ipv4Net,
    pub oob: Ipv4Net,
    pub vpn: Ipv4Net,
    pub sessions: Vec<SessionId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDoc {
    pub version: u32,
    #[serde(flatten)]
    pub session: Session,
}

impl EngineState {
    pub fn plan_doc(&self) -> Result<PlanDoc, EngineError> {
        let plan = self.plan.as_ref().ok_or(EngineError::NoPlan)?;
        let fixed_nets = OticNet::ALL
            .iter()
            .map(|n| NetEntry {
                name: format!("{n:?}").to_lowercase(),
                subnet: plan.otic_net(*n),
                routable: true,
            })
            .collect();
        let tenant_blocks = plan
            .tenant_blocks()
            .map(|b| TenantBlockEntry {
                tenant: b.tenant,
                block: b.block,
                management: b.carved.map(|c| c.management),
                oob: b.carved.map(|c| c.oob),
                vpn: b.carved.map(|c| c.vpn),
            })
            .collect();
        let data_net_allocations = plan
            .data_allocations()
            .map(|d| DataNetEntry {
                interface: d.interface,
                subnet: d.net,
                routable: d.interface.routable(),
                shared: d.shared(),
                test_blocks: d
                    .test_blocks
                    .iter()
                    .map(|(offset, session)| TestBlockEntry {
                        subnet: Ipv4Net::new(
                            std::net::Ipv4Addr::from(u32::from(d.net.addr()) + u32::from(*offset)),
                            29,
                        )
                        .expect("inside /24"),
                        session: *session,
                    })
                    .collect(),
            })
            .collect();
        Ok(PlanDoc {
            version: DOC_VERSION,
            base_prefix: plan.base(),
            fixed_nets,
            tenant_blocks,
            data_net_allocations,
        })
    }

    pub fn tenant_doc(&self, id: TenantId) -> Result<TenantDoc, EngineError> {
        let tenant = self
            .tenants
            .get(&id)
            .ok_or(EngineError::UnknownTenant(id))?;
        let plan = self.plan.as_ref().ok_or(EngineError::NoPlan)?;
        let block = plan
            .tenant_block(id)
            .ok_or(EngineError::Ipam(IpamError::NoTenantBlock(id)))?;
        let carved = block.carved.ok_or(EngineError::NoPlan)?;
        let sessions = self
            .sessions
            .values()
            .filter(|s| s.tenants.contains(&id) && s.state != SessionState::TornDown)
            .map(|s| s.id)
            .collect();
        Ok(TenantDoc {
            version: DOC_VERSION,
            id,
            name: tenant.name.clone(),
            block: block.block,
            management: carved.management,
            oob: carved.oob,
            vpn: carved.vpn,
            sessions,
        })
    }

    pub fn session_doc(&self, id: SessionId) -> Result<SessionDoc, EngineError> {
        let session = self
            .sessions
            .get(&id)
            .ok_or(EngineError::UnknownSession(id))?;
        Ok(SessionDoc {
            version: DOC_VERSION,
            session: session.clone(),
        })
    }
}

// ---------------------------------------------------------------------------
// Engine

pub struct Engine {
    state: EngineState,
    persistence: Option<Persistence>,
    since_snapshot: u32,
}

impl Engine {
    /// Volatile engine with no journal, for embedding and tests.
    pub fn in_memory() -> Self {
        Engine {
            state: EngineState::new(),
            persistence: None,
            since_snapshot: 0,
        }
    }

    /// Engine restored from a snapshot, without persistence.
    pub fn from_state(state: EngineState) -> Self {
        Engine {
            state,
            persistence: None,
            since_snapshot: 0,
        }
    }

    /// Open (or create) a persistent engine in `dir`: load the latest
    /// snapshot if any, replay the journal tail, keep appending.
    pub fn open(dir: &Path) -> Result<Self, PersistError> {
        let (state, persistence) = Persistence::open(dir)?;
        Ok(Engine {
            state,
            persistence: Some(persistence),
            since_snapshot: 0,
        })
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn state_hash(&self) -> String {
        self.state.state_hash()
    }

    /// Execute one command transactionally: apply to a scratch clone,
    /// journal, then commit. Any error leaves the visible state untouched.
    pub fn execute(&mut self, cmd: Command) -> Result<Output, EngineError> {
        let mut next = self.state.clone();
        let output = apply_command(&mut next, &cmd)?;
        let result_hash = next.state_hash();
        if let Some(p) = self.persistence.as_mut() {
            p.append(&cmd, &result_hash)?;
        }
        self.state = next;
        self.since_snapshot += 1;
        if self.since_snapshot >= SNAPSHOT_INTERVAL {
            self.snapshot_now()?;
        }
        Ok(output)
    }

    /// Write a full-state snapshot immediately (persistent engines only).
    pub fn snapshot_now(&mut self) -> Result<(), EngineError> {
        if let Some(p) = self.persistence.as_mut() {
            p.write_snapshot(&self.state)?;
        }
        self.since_snapshot = 0;
        Ok(())
    }

    pub fn journal(&self) -> Option<&JournalWriter> {
        self.persistence.as_ref().map(Persistence::journal)
    }

    pub fn state_dir(&self) -> Option<&Path> {
        self.persistence.as_ref().map(Persistence::dir)
    }
}
