//! Pure-function model of the switched fabric.
//!
//! Reachability is static graph connectivity per VID: no MAC learning, no
//! flooding, no spanning tree. A frame tagged `v` can travel a hop iff both
//! ports of the hop admit `v` (access ports match exactly, trunk ports
//! require membership in the allowed set). The model also carries one
//! logical router to which every routable subnet attaches; L3 reachability
//! is router attachment plus policy.

use std::collections::{BTreeMap, BTreeSet};

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::ids::{DeviceId, PortId, SessionId, TenantId};
use crate::inventory::{Inventory, LinkKind, Owner, PortOwner};
use crate::ipam::{NetClass, OticNet};
use crate::topology::{AnalogMode, LogicalTopology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortMode {
    Access(u16),
    Trunk(BTreeSet<u16>),
    Shutdown,
}

impl PortMode {
    pub fn admits(&self, vid: u16) -> bool {
        match self {
            PortMode::Access(v) => *v == vid,
            PortMode::Trunk(allowed) => allowed.contains(&vid),
            PortMode::Shutdown => false,
        }
    }

    pub fn vids(&self) -> BTreeSet<u16> {
        match self {
            PortMode::Access(v) => BTreeSet::from([*v]),
            PortMode::Trunk(allowed) => allowed.clone(),
            PortMode::Shutdown => BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortConfig {
    pub port: PortId,
    pub mode: PortMode,
    #[serde(default)]
    pub oob: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FabricError {
    #[error("port configuration references unknown port {0}")]
    DanglingPort(PortId),
    #[error("port {0} cannot carry VLANs")]
    NotVlanCapable(PortId),
    #[error("port {port} references inactive VID {vid}")]
    InactiveVid { port: PortId, vid: u16 },
    #[error("unknown port {0}")]
    UnknownPort(PortId),
    #[error("subnet {0} is not attached to the plan")]
    UnknownSubnet(Ipv4Net),
    #[error("digital edge {a}-{b} has no VID mapping for {interface}")]
    MissingVidMapping {
        a: PortId,
        b: PortId,
        interface: crate::ipam::InterfaceKind,
    },
    #[error("device {0} has no recorded owner")]
    UnknownOwner(DeviceId),
}

/// Immutable reachability model, safe to query from many threads.
#[derive(Debug, Clone)]
pub struct FabricModel {
    /// Per-port admitted VID set (configured ethernet ports only).
    admits: BTreeMap<PortId, BTreeSet<u16>>,
    /// Per-VID connected-component label for every admitting port.
    components: BTreeMap<u16, BTreeMap<PortId, u32>>,
    /// Ports that belong to devices (isolation endpoints).
    device_ports: BTreeMap<PortId, DeviceId>,
    /// Every subnet the plan defines, with its class.
    known_subnets: BTreeMap<Ipv4Net, NetClass>,
    /// Subnets attached to the logical router (the routable ones).
    router_subnets: BTreeSet<Ipv4Net>,
}

impl FabricModel {
    pub fn active_vids(&self) -> impl Iterator<Item = u16> + '_ {
        self.components.keys().copied()
    }

    pub fn configured_ports(&self) -> impl Iterator<Item = PortId> + '_ {
        self.admits.keys().copied()
    }

    pub fn device_of_port(&self, port: PortId) -> Option<DeviceId> {
        self.device_ports.get(&port).copied()
    }

    pub fn router_subnets(&self) -> &BTreeSet<Ipv4Net> {
        &self.router_subnets
    }
}

/// Build the immutable fabric model from inventory, the applied port
/// configurations, and the plan's subnet map. Shutdown ports drop out of the
/// graph; analog and OOB links never contribute to L2 connectivity.
pub fn build_fabric(
    inventory: &Inventory,
    configs: &[PortConfig],
    active_vids: &BTreeSet<u16>,
    known_subnets: BTreeMap<Ipv4Net, NetClass>,
) -> Result<FabricModel, FabricError> {
    let mut admits: BTreeMap<PortId, BTreeSet<u16>> = BTreeMap::new();
    for cfg in configs {
        let port = inventory
            .port(cfg.port)
            .ok_or(FabricError::DanglingPort(cfg.port))?;
        if !port.medium.carries_vlans() {
            return Err(FabricError::NotVlanCapable(cfg.port));
        }
        for vid in cfg.mode.vids() {
            if !active_vids.contains(&vid) {
                return Err(FabricError::InactiveVid {
                    port: cfg.port,
                    vid,
                });
            }
        }
        if !matches!(cfg.mode, PortMode::Shutdown) {
            admits.insert(cfg.port, cfg.mode.vids());
        }
    }

    // Adjacency among configured ports: physical access/trunk links plus
    // the internal fabric of each switch.
    let mut neighbors: BTreeMap<PortId, Vec<PortId>> = BTreeMap::new();
    let mut add_adj = |a: PortId, b: PortId| {
        neighbors.entry(a).or_default().push(b);
        neighbors.entry(b).or_default().push(a);
    };
    for link in inventory.links() {
        if !matches!(link.kind, LinkKind::Access | LinkKind::Trunk) {
            continue;
        }
        if admits.contains_key(&link.endpoint_a) && admits.contains_key(&link.endpoint_b) {
            add_adj(link.endpoint_a, link.endpoint_b);
        }
    }
    for switch in inventory.switches() {
        let configured: Vec<PortId> = switch
            .ports
            .iter()
            .map(|p| p.id)
            .filter(|p| admits.contains_key(p))
            .collect();
        for (i, a) in configured.iter().enumerate() {
            for b in &configured[i + 1..] {
                add_adj(*a, *b);
            }
        }
    }

    // Per-VID connected components over the ports that admit the VID.
    let vids_in_use: BTreeSet<u16> = admits.values().flatten().copied().collect();
    let mut components: BTreeMap<u16, BTreeMap<PortId, u32>> = BTreeMap::new();
    for vid in vids_in_use {
        let member = |p: &PortId| admits.get(p).is_some_and(|set| set.contains(&vid));
        let mut labels: BTreeMap<PortId, u32> = BTreeMap::new();
        let mut next_label = 0u32;
        for start in admits.keys().copied().filter(|p| member(p)) {
            if labels.contains_key(&start) {
                continue;
            }
            let label = next_label;
            next_label += 1;
            let mut stack = vec![start];
            labels.insert(start, label);
            while let Some(p) = stack.pop() {
                for q in neighbors.get(&p).into_iter().flatten() {
                    if member(q) && !labels.contains_key(q) {
                        labels.insert(*q, label);
                        stack.push(*q);
                    }
                }
            }
        }
        components.insert(vid, labels);
    }

    let mut device_ports = BTreeMap::new();
    for port in admits.keys() {
        if let Some(PortOwner::Device(dev)) = inventory.port_owner(*port) {
            device_ports.insert(*port, dev);
        }
    }

    let router_subnets = known_subnets
        .iter()
        .filter(|(_, class)| class.routable())
        .map(|(net, _)| *net)
        .collect();

    Ok(FabricModel {
        admits,
        components,
        device_ports,
        known_subnets,
        router_subnets,
    })
}

/// True iff a frame tagged `vid` can travel between the two ports: every
/// traversed hop admits the VID on both sides.
pub fn l2_reachable(
    fabric: &FabricModel,
    a: PortId,
    b: PortId,
    vid: u16,
) -> Result<bool, FabricError> {
    if a == b {
        return Ok(fabric.admits.get(&a).is_some_and(|s| s.contains(&vid)));
    }
    let Some(labels) = fabric.components.get(&vid) else {
        return Ok(false);
    };
    match (labels.get(&a), labels.get(&b)) {
        (Some(la), Some(lb)) => Ok(la == lb),
        _ => Ok(false),
    }
}

/// Symmetric L3 policy over the routed core: a pair of routable subnets may
/// talk iff they belong to the same tenant, one side is the services
/// network, both are facility-internal, or a facility net reaches a routable
/// 5G data net (how M-plane access is operated).
fn l3_policy_permits(a: NetClass, b: NetClass) -> bool {
    use NetClass::*;
    let is_otic = |c: NetClass| matches!(c, Otic(_));
    let is_data = |c: NetClass| matches!(c, DataNet(_) | DataShared(_) | DataTest(..));
    match (a.tenant(), b.tenant()) {
        (Some(ta), Some(tb)) => ta == tb,
        (Some(_), None) | (None, Some(_)) => {
            let other = if a.tenant().is_some() { b } else { a };
            // Tenants reach the shared services network and nothing else
            // outside their own /24.
            other == Otic(OticNet::Services)
        }
        (None, None) => {
            if is_otic(a) && is_otic(b) {
                true
            } else {
                // Facility nets operate the routable data nets (M-plane).
                (is_otic(a) && is_data(b)) || (is_data(a) && is_otic(b))
            }
        }
    }
}

/// True iff both subnets attach to the logical router and policy permits
/// the pair. Unknown subnets are an error; known-but-unrouted ones are
/// simply unreachable.
pub fn l3_reachable(
    fabric: &FabricModel,
    a: Ipv4Net,
    b: Ipv4Net,
) -> Result<bool, FabricError> {
    let ca = *fabric
        .known_subnets
        .get(&a)
        .ok_or(FabricError::UnknownSubnet(a))?;
    let cb = *fabric
        .known_subnets
        .get(&b)
        .ok_or(FabricError::UnknownSubnet(b))?;
    if !fabric.router_subnets.contains(&a) || !fabric.router_subnets.contains(&b) {
        return Ok(false);
    }
    if a == b {
        return Ok(true);
    }
    Ok(l3_policy_permits(ca, cb))
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EdgeCheck {
    Digital {
        a: PortId,
        b: PortId,
        interface: crate::ipam::InterfaceKind,
        vid: u16,
        passed: bool,
    },
    Analog {
        a: PortId,
        b: PortId,
        mode: AnalogMode,
        passed: bool,
    },
}

impl EdgeCheck {
    pub fn passed(&self) -> bool {
        match self {
            EdgeCheck::Digital { passed, .. } | EdgeCheck::Analog { passed, .. } => *passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scope")]
pub enum IsolationViolation {
    L2 {
        vid: u16,
        tenant_a: TenantId,
        endpoint_a: PortId,
        tenant_b: TenantId,
        endpoint_b: PortId,
    },
    L3 {
        tenant_a: TenantId,
        subnet_a: Ipv4Net,
        tenant_b: TenantId,
        subnet_b: Ipv4Net,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub version: u32,
    pub intent_results: Vec<EdgeCheck>,
    pub isolation_violations: Vec<IsolationViolation>,
}

pub const REPORT_VERSION: u32 = 1;

impl VerificationReport {
    pub fn new() -> Self {
        VerificationReport {
            version: REPORT_VERSION,
            intent_results: Vec::new(),
            isolation_violations: Vec::new(),
        }
    }

    pub fn intent_passed(&self) -> bool {
        self.intent_results.iter().all(EdgeCheck::passed)
    }

    pub fn isolation_passed(&self) -> bool {
        self.isolation_violations.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.intent_passed() && self.isolation_passed()
    }

    pub fn merge(mut self, other: VerificationReport) -> VerificationReport {
        self.intent_results.extend(other.intent_results);
        self.isolation_violations.extend(other.isolation_violations);
        self
    }
}

/// Check that the provisioned fabric realizes a compiled topology: each
/// digital edge must be L2-reachable on its interface's VID, each analog
/// edge must exist as a physical analog link of the right media.
pub fn verify_intent(
    fabric: &FabricModel,
    inventory: &Inventory,
    topology: &LogicalTopology,
    vlan_map: &BTreeMap<crate::ipam::InterfaceKind, u16>,
) -> Result<VerificationReport, FabricError> {
    let mut report = VerificationReport::new();
    for edge in &topology.digital_edges {
        let vid = *vlan_map
            .get(&edge.interface)
            .ok_or(FabricError::MissingVidMapping {
                a: edge.a,
                b: edge.b,
                interface: edge.interface,
            })?;
        let passed = l2_reachable(fabric, edge.a, edge.b, vid)?;
        report.intent_results.push(EdgeCheck::Digital {
            a: edge.a,
            b: edge.b,
            interface: edge.interface,
            vid,
            passed,
        });
    }
    for edge in &topology.analog_edges {
        let wanted = match edge.mode {
            AnalogMode::Radiated => crate::inventory::PortMedium::RfAntenna,
            AnalogMode::Conducted => crate::inventory::PortMedium::RfCoaxial,
        };
        let media_ok = [edge.a, edge.b]
            .iter()
            .all(|p| inventory.port(*p).is_some_and(|port| port.medium == wanted));
        let passed = media_ok && inventory.analog_link_between(edge.a, edge.b);
        report.intent_results.push(EdgeCheck::Analog {
            a: edge.a,
            b: edge.b,
            mode: edge.mode,
            passed,
        });
    }
    Ok(report)
}

/// A session-scoped exemption from the isolation rule: the listed tenants
/// may share the listed VIDs and subnets (multi-vendor interoperability and
/// Plugfest-style shared access).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedGrant {
    pub session: SessionId,
    pub tenants: BTreeSet<TenantId>,
    pub vids: BTreeSet<u16>,
    pub subnets: BTreeSet<Ipv4Net>,
}

impl SharedGrant {
    fn covers_vid(&self, vid: u16, a: TenantId, b: TenantId) -> bool {
        self.vids.contains(&vid) && self.tenants.contains(&a) && self.tenants.contains(&b)
    }

    fn covers_subnets(&self, x: Ipv4Net, y: Ipv4Net) -> bool {
        self.subnets.contains(&x) && self.subnets.contains(&y)
    }
}

/// Scan the whole fabric for cross-tenant exposure: any VID on which two
/// tenants' device ports sit in one L2 segment without a covering grant,
/// and any routed path between two tenants' subnets.
pub fn verify_isolation(
    fabric: &FabricModel,
    ownership: &BTreeMap<DeviceId, Owner>,
    grants: &[SharedGrant],
) -> Result<VerificationReport, FabricError> {
    let mut report = VerificationReport::new();
    for (vid, labels) in &fabric.components {
        // Group device ports by component, then look for mixed ownership.
        let mut groups: BTreeMap<u32, Vec<(PortId, TenantId)>> = BTreeMap::new();
        for (port, label) in labels {
            let Some(dev) = fabric.device_ports.get(port) else {
                continue;
            };
            let owner = ownership
                .get(dev)
                .ok_or(FabricError::UnknownOwner(*dev))?;
            if let Owner::Tenant(tenant) = owner {
                groups.entry(*label).or_default().push((*port, *tenant));
            }
        }
        for members in groups.values() {
            for (i, (port_a, ta)) in members.iter().enumerate() {
                for (port_b, tb) in &members[i + 1..] {
                    if ta == tb {
                        continue;
                    }
                    let granted = grants.iter().any(|g| g.covers_vid(*vid, *ta, *tb));
                    if !granted {
                        report.isolation_violations.push(IsolationViolation::L2 {
                            vid: *vid,
                            tenant_a: *ta,
                            endpoint_a: *port_a,
                            tenant_b: *tb,
                            endpoint_b: *port_b,
                        });
                    }
                }
            }
        }
    }

    // L3 sweep over tenant-owned routable subnets.
    let tenant_subnets: Vec<(Ipv4Net, TenantId)> = fabric
        .known_subnets
        .iter()
        .filter_map(|(net, class)| class.tenant().map(|t| (*net, t)))
        .collect();
    for (i, (net_a, ta)) in tenant_subnets.iter().enumerate() {
        for (net_b, tb) in &tenant_subnets[i + 1..] {
            if ta == tb {
                continue;
            }
            if l3_reachable(fabric, *net_a, *net_b)?
                && !grants.iter().any(|g| g.covers_subnets(*net_a, *net_b))
            {
                report.isolation_violations.push(IsolationViolation::L3 {
                    tenant_a: *ta,
                    subnet_a: *net_a,
                    tenant_b: *tb,
                    subnet_b: *net_b,
                });
            }
        }
    }
    Ok(report)
}
