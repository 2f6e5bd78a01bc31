//! Source of truth for sites, switches, devices, ports, and physical links.
//!
//! The inventory is append-only: entities are registered, never removed, so
//! identifier counters can be reconstructed from the highest id seen in an
//! imported document. Exports are stable-ordered by id and `import(export(x))`
//! is the identity.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::FeatureSet;
use crate::ids::{DeviceId, LinkId, PortId, SiteId, SwitchId, TenantId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    DataCenter,
    Lab,
    AnechoicChamber,
    Outdoor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockRole {
    None,
    TBc,
    TGm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceRole {
    Dut,
    Te,
    Service,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Cu,
    Du,
    Ru,
    UeEmulator,
    DuEmulator,
    RuUeEmulator,
    CoreEmulator,
    Vst,
    ImpairmentEmulator,
    TGm,
    Compute,
    Vpn,
    Storage,
    Directory,
    Dns,
    Monitor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortMedium {
    Ethernet,
    RfCoaxial,
    RfAntenna,
    GpsCoax,
}

/// Broad compatibility class used when cabling ports together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MediumClass {
    Digital,
    AnalogRf,
    Gps,
}

impl PortMedium {
    pub fn class(self) -> MediumClass {
        match self {
            PortMedium::Ethernet => MediumClass::Digital,
            PortMedium::RfCoaxial | PortMedium::RfAntenna => MediumClass::AnalogRf,
            PortMedium::GpsCoax => MediumClass::Gps,
        }
    }

    /// Only ethernet ports participate in VLAN configuration.
    pub fn carries_vlans(self) -> bool {
        self == PortMedium::Ethernet
    }
}

impl FromStr for PortMedium {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ethernet" | "eth" => Ok(PortMedium::Ethernet),
            "rf_coaxial" | "rf-coaxial" | "coax" => Ok(PortMedium::RfCoaxial),
            "rf_antenna" | "rf-antenna" | "antenna" => Ok(PortMedium::RfAntenna),
            "gps_coax" | "gps-coax" | "gps" => Ok(PortMedium::GpsCoax),
            other => Err(format!("unknown port medium `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Access,
    Trunk,
    Analog,
    Oob,
}

impl FromStr for LinkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "access" => Ok(LinkKind::Access),
            "trunk" => Ok(LinkKind::Trunk),
            "analog" => Ok(LinkKind::Analog),
            "oob" => Ok(LinkKind::Oob),
            other => Err(format!("unknown link kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    Otic,
    Tenant(TenantId),
}

impl Owner {
    pub fn tenant(self) -> Option<TenantId> {
        match self {
            Owner::Tenant(t) => Some(t),
            Owner::Otic => None,
        }
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::Otic => write!(f, "otic"),
            Owner::Tenant(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub id: PortId,
    pub name: String,
    pub medium: PortMedium,
    /// Nominal capacity in Gbit/s; 0 for analog media.
    pub capacity_gbps: u32,
}

/// Port description supplied at registration time, before an id exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    pub medium: PortMedium,
    #[serde(default)]
    pub capacity_gbps: u32,
}

impl PortSpec {
    pub fn new(name: impl Into<String>, medium: PortMedium, capacity_gbps: u32) -> Self {
        Self {
            name: name.into(),
            medium,
            capacity_gbps,
        }
    }

    pub fn eth(name: impl Into<String>, capacity_gbps: u32) -> Self {
        Self::new(name, PortMedium::Ethernet, capacity_gbps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: SiteId,
    pub name: String,
    pub kind: SiteKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Switch {
    pub id: SwitchId,
    pub site: SiteId,
    pub model: String,
    pub ports: Vec<Port>,
    pub clock_role: ClockRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Device {
    pub id: DeviceId,
    pub site: SiteId,
    pub owner: Owner,
    pub role: DeviceRole,
    pub kind: DeviceKind,
    pub ports: Vec<Port>,
    pub features: FeatureSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysicalLink {
    pub id: LinkId,
    pub endpoint_a: PortId,
    pub endpoint_b: PortId,
    pub kind: LinkKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortOwner {
    Switch(SwitchId),
    Device(DeviceId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InventoryError {
    #[error("site name `{0}` already registered")]
    DuplicateSiteName(String),
    #[error("unknown site {0}")]
    UnknownSite(SiteId),
    #[error("duplicate port name `{0}` on one device or switch")]
    DuplicatePortName(String),
    #[error("a DUT must be owned by a tenant")]
    DutWithoutTenant,
    #[error("unknown port {0}")]
    UnknownPort(PortId),
    #[error("port {0} is already part of link {1}")]
    PortOccupied(PortId, LinkId),
    #[error("media of ports {0} and {1} are incompatible")]
    MediumMismatch(PortId, PortId),
    #[error("link kind {kind:?} not valid for media of ports {a} and {b}")]
    InvalidLinkKind { kind: LinkKind, a: PortId, b: PortId },
    #[error("cannot link port {0} to itself")]
    SelfLink(PortId),
    #[error("invalid inventory document: {0}")]
    InvalidDocument(String),
}

/// Versioned wire form of the inventory, used by export/import and embedded
/// in engine snapshots.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryDoc {
    pub version: u32,
    pub sites: Vec<Site>,
    pub switches: Vec<Switch>,
    pub devices: Vec<Device>,
    pub links: Vec<PhysicalLink>,
}

pub const INVENTORY_DOC_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InventoryDoc", into = "InventoryDoc")]
pub struct Inventory {
    sites: BTreeMap<SiteId, Site>,
    switches: BTreeMap<SwitchId, Switch>,
    devices: BTreeMap<DeviceId, Device>,
    links: BTreeMap<LinkId, PhysicalLink>,
    // Derived indexes, rebuilt on import.
    port_owners: BTreeMap<PortId, PortOwner>,
    port_links: BTreeMap<PortId, LinkId>,
    next_site: u32,
    next_switch: u32,
    next_device: u32,
    next_port: u32,
    next_link: u32,
}

impl Inventory {
    pub fn new() -> Self {
        Self {
            next_site: 1,
            next_switch: 1,
            next_device: 1,
            next_port: 1,
            next_link: 1,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
            && self.switches.is_empty()
            && self.devices.is_empty()
            && self.links.is_empty()
    }

    pub fn register_site(&mut self, name: &str, kind: SiteKind) -> Result<SiteId, InventoryError> {
        if self.sites.values().any(|s| s.name == name) {
            return Err(InventoryError::DuplicateSiteName(name.to_string()));
        }
        let id = SiteId(self.next_site);
        self.next_site += 1;
        self.sites.insert(
            id,
            Site {
                id,
                name: name.to_string(),
                kind,
            },
        );
        Ok(id)
    }

    fn make_ports(&mut self, specs: &[PortSpec]) -> Result<Vec<Port>, InventoryError> {
        let mut seen = std::collections::BTreeSet::new();
        for spec in specs {
            if !seen.insert(spec.name.as_str()) {
                return Err(InventoryError::DuplicatePortName(spec.name.clone()));
            }
        }
        Ok(specs
            .iter()
            .map(|spec| {
                let id = PortId(self.next_port);
                self.next_port += 1;
                Port {
                    id,
                    name: spec.name.clone(),
                    medium: spec.medium,
                    capacity_gbps: spec.capacity_gbps,
                }
            })
            .collect())
    }

    pub fn register_switch(
        &mut self,
        site: SiteId,
        model: &str,
        ports: &[PortSpec],
        clock_role: ClockRole,
    ) -> Result<SwitchId, InventoryError> {
        if !self.sites.contains_key(&site) {
            return Err(InventoryError::UnknownSite(site));
        }
        let ports = self.make_ports(ports)?;
        let id = SwitchId(self.next_switch);
        self.next_switch += 1;
        for p in &ports {
            self.port_owners.insert(p.id, PortOwner::Switch(id));
        }
        self.switches.insert(
            id,
            Switch {
                id,
                site,
                model: model.to_string(),
                ports,
                clock_role,
            },
        );
        Ok(id)
    }

    pub fn register_device(
        &mut self,
        site: SiteId,
        owner: Owner,
        role: DeviceRole,
        kind: DeviceKind,
        ports: &[PortSpec],
        features: FeatureSet,
    ) -> Result<DeviceId, InventoryError> {
        if !self.sites.contains_key(&site) {
            return Err(InventoryError::UnknownSite(site));
        }
        if role == DeviceRole::Dut && owner.tenant().is_none() {
            return Err(InventoryError::DutWithoutTenant);
        }
        for key in features.unknown_keys() {
            log::warn!("device feature key `{key}` is not in the shipped catalog");
        }
        let ports = self.make_ports(ports)?;
        let id = DeviceId(self.next_device);
        self.next_device += 1;
        for p in &ports {
            self.port_owners.insert(p.id, PortOwner::Device(id));
        }
        self.devices.insert(
            id,
            Device {
                id,
                site,
                owner,
                role,
                kind,
                ports,
                features,
            },
        );
        Ok(id)
    }

    fn validate_new_link(
        &self,
        a: PortId,
        b: PortId,
        kind: LinkKind,
    ) -> Result<(), InventoryError> {
        if a == b {
            return Err(InventoryError::SelfLink(a));
        }
        let pa = self.port(a).ok_or(InventoryError::UnknownPort(a))?;
        let pb = self.port(b).ok_or(InventoryError::UnknownPort(b))?;
        if pa.medium.class() != pb.medium.class() {
            return Err(InventoryError::MediumMismatch(a, b));
        }
        let digital = pa.medium.class() == MediumClass::Digital;
        let kind_ok = match kind {
            LinkKind::Access | LinkKind::Trunk | LinkKind::Oob => digital,
            LinkKind::Analog => !digital,
        };
        if !kind_ok {
            return Err(InventoryError::InvalidLinkKind { kind, a, b });
        }
        for port in [a, b] {
            if let Some(l) = self.port_links.get(&port) {
                return Err(InventoryError::PortOccupied(port, *l));
            }
        }
        Ok(())
    }

    pub fn add_link(
        &mut self,
        a: PortId,
        b: PortId,
        kind: LinkKind,
    ) -> Result<LinkId, InventoryError> {
        self.validate_new_link(a, b, kind)?;
        let id = LinkId(self.next_link);
        self.next_link += 1;
        self.links.insert(
            id,
            PhysicalLink {
                id,
                endpoint_a: a,
                endpoint_b: b,
                kind,
            },
        );
        self.port_links.insert(a, id);
        self.port_links.insert(b, id);
        Ok(id)
    }

    pub fn export(&self) -> InventoryDoc {
        InventoryDoc {
            version: INVENTORY_DOC_VERSION,
            sites: self.sites.values().cloned().collect(),
            switches: self.switches.values().cloned().collect(),
            devices: self.devices.values().cloned().collect(),
            links: self.links.values().cloned().collect(),
        }
    }

    pub fn import(doc: InventoryDoc) -> Result<Self, InventoryError> {
        if doc.version != INVENTORY_DOC_VERSION {
            return Err(InventoryError::InvalidDocument(format!(
                "unsupported version {}",
                doc.version
            )));
        }
        let mut inv = Inventory::new();
        let mut names = std::collections::BTreeSet::new();
        for site in doc.sites {
            if !names.insert(site.name.clone()) {
                return Err(InventoryError::DuplicateSiteName(site.name));
            }
            inv.next_site = inv.next_site.max(site.id.0 + 1);
            inv.sites.insert(site.id, site);
        }
        let claim_ports = |inv: &mut Inventory,
                               ports: &[Port],
                               owner: PortOwner|
         -> Result<(), InventoryError> {
            let mut names = std::collections::BTreeSet::new();
            for p in ports {
                if !names.insert(p.name.clone()) {
                    return Err(InventoryError::DuplicatePortName(p.name.clone()));
                }
                if inv.port_owners.insert(p.id, owner).is_some() {
                    return Err(InventoryError::InvalidDocument(format!(
                        "port {} appears twice",
                        p.id
                    )));
                }
                inv.next_port = inv.next_port.max(p.id.0 + 1);
            }
            Ok(())
        };
        for sw in doc.switches {
            if !inv.sites.contains_key(&sw.site) {
                return Err(InventoryError::UnknownSite(sw.site));
            }
            claim_ports(&mut inv, &sw.ports, PortOwner::Switch(sw.id))?;
            inv.next_switch = inv.next_switch.max(sw.id.0 + 1);
            if inv.switches.insert(sw.id, sw).is_some() {
                return Err(InventoryError::InvalidDocument(
                    "duplicate switch id".into(),
                ));
            }
        }
        for dev in doc.devices {
            if !inv.sites.contains_key(&dev.site) {
                return Err(InventoryError::UnknownSite(dev.site));
            }
            if dev.role == DeviceRole::Dut && dev.owner.tenant().is_none() {
                return Err(InventoryError::DutWithoutTenant);
            }
            claim_ports(&mut inv, &dev.ports, PortOwner::Device(dev.id))?;
            inv.next_device = inv.next_device.max(dev.id.0 + 1);
            if inv.devices.insert(dev.id, dev).is_some() {
                return Err(InventoryError::InvalidDocument(
                    "duplicate device id".into(),
                ));
            }
        }
        for link in doc.links {
            // Same validation path as live registration, keeping document
            // ids intact so import(export(x)) == x.
            inv.validate_new_link(link.endpoint_a, link.endpoint_b, link.kind)?;
            if inv.links.contains_key(&link.id) {
                return Err(InventoryError::InvalidDocument("duplicate link id".into()));
            }
            inv.next_link = inv.next_link.max(link.id.0 + 1);
            inv.port_links.insert(link.endpoint_a, link.id);
            inv.port_links.insert(link.endpoint_b, link.id);
            inv.links.insert(link.id, link);
        }
        Ok(inv)
    }

    // ---- queries ----

    pub fn sites(&self) -> impl Iterator<Item = &Site> {
        self.sites.values()
    }

    pub fn switches(&self) -> impl Iterator<Item = &Switch> {
        self.switches.values()
    }

    pub fn devices(&self) -> impl Iterator<Item = &Device> {
        self.devices.values()
    }

    pub fn links(&self) -> impl Iterator<Item = &PhysicalLink> {
        self.links.values()
    }

    pub fn site(&self, id: SiteId) -> Option<&Site> {
        self.sites.get(&id)
    }

    pub fn switch(&self, id: SwitchId) -> Option<&Switch> {
        self.switches.get(&id)
    }

    pub fn device(&self, id: DeviceId) -> Option<&Device> {
        self.devices.get(&id)
    }

    pub fn port_owner(&self, id: PortId) -> Option<PortOwner> {
        self.port_owners.get(&id).copied()
    }

    pub fn port(&self, id: PortId) -> Option<&Port> {
        match self.port_owners.get(&id)? {
            PortOwner::Switch(sw) => self.switches[sw].ports.iter().find(|p| p.id == id),
            PortOwner::Device(d) => self.devices[d].ports.iter().find(|p| p.id == id),
        }
    }

    /// The link a port participates in, if any.
    pub fn link_of(&self, port: PortId) -> Option<&PhysicalLink> {
        self.port_links.get(&port).map(|l| &self.links[l])
    }

    /// Resolve `sw1:eth0` / `d3:fh0` style references.
    pub fn port_by_name(&self, owner: &str, name: &str) -> Option<&Port> {
        if let Ok(sw) = owner.parse::<SwitchId>() {
            return self.switches.get(&sw)?.ports.iter().find(|p| p.name == name);
        }
        if let Ok(d) = owner.parse::<DeviceId>() {
            return self.devices.get(&d)?.ports.iter().find(|p| p.name == name);
        }
        None
    }

    /// Whether an analog link of matching media connects the two ports.
    pub fn analog_link_between(&self, a: PortId, b: PortId) -> bool {
        self.links.values().any(|l| {
            l.kind == LinkKind::Analog
                && ((l.endpoint_a == a && l.endpoint_b == b)
                    || (l.endpoint_a == b && l.endpoint_b == a))
        })
    }

    /// Internal consistency check, used by replay and fuzz harnesses.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen_ports = std::collections::BTreeSet::new();
        for l in self.links.values() {
            for p in [l.endpoint_a, l.endpoint_b] {
                if !seen_ports.insert(p) {
                    return Err(format!("port {p} participates in two links"));
                }
                if self.port(p).is_none() {
                    return Err(format!("link {} references unknown port {p}", l.id));
                }
            }
            let ca = self.port(l.endpoint_a).unwrap().medium.class();
            let cb = self.port(l.endpoint_b).unwrap().medium.class();
            if ca != cb {
                return Err(format!("link {} mixes medium classes", l.id));
            }
        }
        for d in self.devices.values() {
            if d.role == DeviceRole::Dut && d.owner.tenant().is_none() {
                return Err(format!("DUT {} has no tenant owner", d.id));
            }
        }
        Ok(())
    }
}

impl From<Inventory> for InventoryDoc {
    fn from(inv: Inventory) -> Self {
        inv.export()
    }
}

impl TryFrom<InventoryDoc> for Inventory {
    type Error = InventoryError;

    fn try_from(doc: InventoryDoc) -> Result<Self, Self::Error> {
        Inventory::import(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eth_specs(n: u32, gbps: u32) -> Vec<PortSpec> {
        (0..n).map(|i| PortSpec::eth(format!("p{i}"), gbps)).collect()
    }

    #[test]
    fn register_site_assigns_fresh_ids_and_rejects_duplicates() {
        let mut inv = Inventory::new();
        let a = inv.register_site("DataCenter-A", SiteKind::DataCenter).unwrap();
        assert_eq!(
            inv.register_site("DataCenter-A", SiteKind::Lab),
            Err(InventoryError::DuplicateSiteName("DataCenter-A".into()))
        );
        let b = inv.register_site("Chamber-1", SiteKind::AnechoicChamber).unwrap();
        assert_ne!(a, b);
        // Oracle: scan the store after two inserts.
        let names: Vec<_> = inv.sites().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["DataCenter-A", "Chamber-1"]);
    }

    #[test]
    fn register_switch_with_32_100g_ports() {
        let mut inv = Inventory::new();
        let dc = inv.register_site("dc", SiteKind::DataCenter).unwrap();
        let sw = inv
            .register_switch(dc, "S5232F-ON", &eth_specs(32, 100), ClockRole::TBc)
            .unwrap();
        let sw = inv.switch(sw).unwrap();
        assert_eq!(sw.ports.len(), 32);
        assert!(sw.ports.iter().all(|p| p.medium == PortMedium::Ethernet));
        assert!(sw.ports.iter().all(|p| p.capacity_gbps == 100));
    }

    #[test]
    fn zero_port_switch_is_legal() {
        let mut inv = Inventory::new();
        let dc = inv.register_site("dc", SiteKind::DataCenter).unwrap();
        let sw = inv.register_switch(dc, "X", &[], ClockRole::None).unwrap();
        assert!(inv.switch(sw).unwrap().ports.is_empty());
    }

    #[test]
    fn duplicate_port_names_rejected() {
        let mut inv = Inventory::new();
        let dc = inv.register_site("dc", SiteKind::DataCenter).unwrap();
        let specs = vec![PortSpec::eth("p0", 10), PortSpec::eth("p0", 10)];
        assert_eq!(
            inv.register_switch(dc, "X", &specs, ClockRole::None),
            Err(InventoryError::DuplicatePortName("p0".into()))
        );
    }

    #[test]
    fn dut_requires_tenant_owner() {
        let mut inv = Inventory::new();
        let dc = inv.register_site("dc", SiteKind::DataCenter).unwrap();
        let err = inv.register_device(
            dc,
            Owner::Otic,
            DeviceRole::Dut,
            DeviceKind::Du,
            &eth_specs(1, 25),
            FeatureSet::new(),
        );
        assert_eq!(err, Err(InventoryError::DutWithoutTenant));
        // TE owned by the facility is fine.
        inv.register_device(
            dc,
            Owner::Otic,
            DeviceRole::Te,
            DeviceKind::CoreEmulator,
            &eth_specs(1, 25),
            FeatureSet::new(),
        )
        .unwrap();
    }

    #[test]
    fn ru_with_fronthaul_and_antenna_ports() {
        let mut inv = Inventory::new();
        let lab = inv.register_site("lab", SiteKind::Lab).unwrap();
        let ru = inv
            .register_device(
                lab,
                Owner::Tenant(TenantId(3)),
                DeviceRole::Dut,
                DeviceKind::Ru,
                &[
                    PortSpec::eth("fh0", 25),
                    PortSpec::new("ant0", PortMedium::RfAntenna, 0),
                ],
                FeatureSet::from_iter([("bandwidth_mhz", ["100"])]),
            )
            .unwrap();
        let dev = inv.device(ru).unwrap();
        assert_eq!(dev.ports[0].medium, PortMedium::Ethernet);
        assert_eq!(dev.ports[1].medium, PortMedium::RfAntenna);
    }

    fn linked_fixture() -> (Inventory, PortId, PortId, PortId, PortId) {
        let mut inv = Inventory::new();
        let dc = inv.register_site("dc", SiteKind::DataCenter).unwrap();
        let lab = inv.register_site("lab", SiteKind::Lab).unwrap();
        let sw1 = inv
            .register_switch(dc, "S5232F-ON", &eth_specs(32, 100), ClockRole::TBc)
            .unwrap();
        let sw2 = inv
            .register_switch(lab, "S5248F-ON", &eth_specs(32, 100), ClockRole::TBc)
            .unwrap();
        let ru = inv
            .register_device(
                lab,
                Owner::Tenant(TenantId(1)),
                DeviceRole::Dut,
                DeviceKind::Ru,
                &[
                    PortSpec::eth("fh0", 25),
                    PortSpec::new("rf0", PortMedium::RfCoaxial, 0),
                ],
                FeatureSet::new(),
            )
            .unwrap();
        let vst = inv
            .register_device(
                lab,
                Owner::Otic,
                DeviceRole::Te,
                DeviceKind::Vst,
                &[PortSpec::new("rf0", PortMedium::RfCoaxial, 0)],
                FeatureSet::new(),
            )
            .unwrap();
        let sw1_p31 = inv.switch(sw1).unwrap().ports[31].id;
        let sw2_p31 = inv.switch(sw2).unwrap().ports[31].id;
        let ru_rf = inv.device(ru).unwrap().ports[1].id;
        let vst_rf = inv.device(vst).unwrap().ports[0].id;
        (inv, sw1_p31, sw2_p31, ru_rf, vst_rf)
    }

    #[test]
    fn add_link_trunk_and_analog() {
        let (mut inv, sw1_p31, sw2_p31, ru_rf, vst_rf) = linked_fixture();
        inv.add_link(sw1_p31, sw2_p31, LinkKind::Trunk).unwrap();
        inv.add_link(ru_rf, vst_rf, LinkKind::Analog).unwrap();
        assert!(inv.analog_link_between(vst_rf, ru_rf));
        inv.check_invariants().unwrap();
    }

    #[test]
    fn add_link_rejects_medium_mismatch_and_occupied_ports() {
        let (mut inv, sw1_p31, sw2_p31, ru_rf, _) = linked_fixture();
        assert!(matches!(
            inv.add_link(ru_rf, sw1_p31, LinkKind::Analog),
            Err(InventoryError::MediumMismatch(..))
        ));
        inv.add_link(sw1_p31, sw2_p31, LinkKind::Trunk).unwrap();
        assert!(matches!(
            inv.add_link(sw1_p31, sw2_p31, LinkKind::Trunk),
            Err(InventoryError::PortOccupied(..))
        ));
    }

    #[test]
    fn analog_kind_requires_analog_media() {
        let (mut inv, sw1_p31, sw2_p31, ru_rf, vst_rf) = linked_fixture();
        assert!(matches!(
            inv.add_link(sw1_p31, sw2_p31, LinkKind::Analog),
            Err(InventoryError::InvalidLinkKind { .. })
        ));
        assert!(matches!(
            inv.add_link(ru_rf, vst_rf, LinkKind::Trunk),
            Err(InventoryError::InvalidLinkKind { .. })
        ));
    }

    #[test]
    fn export_round_trip_is_identity() {
        let (mut inv, sw1_p31, sw2_p31, ru_rf, vst_rf) = linked_fixture();
        inv.add_link(sw1_p31, sw2_p31, LinkKind::Trunk).unwrap();
        inv.add_link(ru_rf, vst_rf, LinkKind::Analog).unwrap();
        let doc = inv.export();
        let back = Inventory::import(doc.clone()).unwrap();
        assert_eq!(back, inv);
        // Determinism: two exports without mutation are byte-identical.
        assert_eq!(
            serde_json::to_string(&doc).unwrap(),
            serde_json::to_string(&inv.export()).unwrap()
        );
    }

    #[test]
    fn export_of_empty_store_has_empty_collections() {
        let doc = Inventory::new().export();
        assert_eq!(doc.version, 1);
        assert!(doc.sites.is_empty() && doc.links.is_empty());
        assert_eq!(Inventory::import(doc).unwrap(), Inventory::new());
    }
}
