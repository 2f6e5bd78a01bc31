//! Compilation of test intents into logical topologies.
//!
//! Each session kind carries a fixed template of required device roles and
//! the adjacencies to wire between them: conformance wraps a single DUT in
//! emulators, interoperability wraps a DU/RU pair, end-to-end wraps a whole
//! disaggregated gNB between UE and core simulators. Compilation either
//! yields the complete edge set or a role-level error, never a partial
//! topology.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::features::{catalog, FeatureSet};
use crate::ids::{DeviceId, PortId};
use crate::inventory::{Device, DeviceKind, DeviceRole, Inventory, LinkKind, PortMedium};
use crate::ipam::InterfaceKind;
use crate::vlan::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionKind {
    RuConformance,
    DuConformance,
    Wg4Iot,
    Wg5Iot,
    E2e,
    E2eMobility,
}

impl std::str::FromStr for SessionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ru_conformance" => Ok(SessionKind::RuConformance),
            "du_conformance" => Ok(SessionKind::DuConformance),
            "wg4_iot" => Ok(SessionKind::Wg4Iot),
            "wg5_iot" => Ok(SessionKind::Wg5Iot),
            "e2e" => Ok(SessionKind::E2e),
            "e2e_mobility" => Ok(SessionKind::E2eMobility),
            other => Err(format!("unknown session kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogMode {
    Radiated,
    Conducted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplaneSource {
    Device(DeviceId),
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionOptions {
    #[serde(default = "default_analog_mode")]
    pub analog_mode: AnalogMode,
    /// Interfaces to route through an impairment emulator.
    #[serde(default)]
    pub impair: BTreeSet<InterfaceKind>,
    #[serde(default = "default_delay")]
    pub impair_delay_us: u32,
    /// Extra interfaces for WG5 interoperability; F1 is always wired.
    #[serde(default)]
    pub wg5_interfaces: BTreeSet<InterfaceKind>,
    #[serde(default)]
    pub splane_source: Option<SplaneSource>,
    /// When set, attach an O1 management overlay from this device to every
    /// DUT in the session.
    #[serde(default)]
    pub o1_manager: Option<DeviceId>,
    /// Plugfest mode: grant the session's tenants shared-/26 access.
    #[serde(default)]
    pub shared: bool,
}

fn default_analog_mode() -> AnalogMode {
    AnalogMode::Conducted
}

fn default_delay() -> u32 {
    100
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            analog_mode: AnalogMode::Conducted,
            impair: BTreeSet::new(),
            impair_delay_us: default_delay(),
            wg5_interfaces: BTreeSet::new(),
            splane_source: None,
            o1_manager: None,
            shared: false,
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct DigitalEdge {
    pub a: PortId,
    pub b: PortId,
    pub interface: InterfaceKind,
}

impl DigitalEdge {
    /// O-FH planes carried by this edge; empty for non-fronthaul interfaces.
    pub fn planes(&self) -> BTreeSet<Plane> {
        match self.interface {
            InterfaceKind::OfhM => BTreeSet::from([Plane::M]),
            InterfaceKind::OfhCu => BTreeSet::from([Plane::CuC, Plane::CuU]),
            _ => BTreeSet::new(),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct AnalogEdge {
    pub a: PortId,
    pub b: PortId,
    pub mode: AnalogMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Impairment {
    pub interface: InterfaceKind,
    pub device: DeviceId,
    pub delay_us: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalTopology {
    pub digital_edges: BTreeSet<DigitalEdge>,
    pub analog_edges: BTreeSet<AnalogEdge>,
    pub impairments: Vec<Impairment>,
    pub splane_source: Option<SplaneSource>,
}

impl LogicalTopology {
    /// Distinct digital interface kinds present in the topology, i.e. the
    /// VLAN demands of a session.
    pub fn interfaces(&self) -> BTreeSet<InterfaceKind> {
        self.digital_edges.iter().map(|e| e.interface).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("{kind:?} template needs a {needed:?} device")]
    MissingRole {
        kind: SessionKind,
        needed: DeviceKind,
    },
    #[error("device {device} of kind {kind:?} does not fit the template")]
    WrongDeviceKind { device: DeviceId, kind: DeviceKind },
    #[error("device {device} must have role {expected:?}")]
    WrongRole {
        device: DeviceId,
        expected: DeviceRole,
    },
    #[error("device {0} has no ethernet port")]
    NoEthernetPort(DeviceId),
    #[error("device {device} has no free {mode:?}-capable RF port")]
    AnalogPortMissing { device: DeviceId, mode: AnalogMode },
    #[error("mobility testing needs at least two RUs")]
    MobilityNeedsMultipleRus,
    #[error("cannot pair {rus} RUs with {dus} DUs")]
    MismatchedPairing { rus: usize, dus: usize },
    #[error("impairment on {0} requires an impairment emulator participant")]
    ImpairmentWithoutDevice(InterfaceKind),
    #[error("{kind:?} does not support impairment on {interface}")]
    ImpairNotAllowed {
        kind: SessionKind,
        interface: InterfaceKind,
    },
    #[error("interface {0} is not valid for WG5 interoperability")]
    WrongWg5Interface(InterfaceKind),
    #[error("{0:?} requires an explicit S-plane source")]
    MissingSplaneSource(SessionKind),
    #[error("device {0} cannot source the S-plane for this template")]
    InvalidSplaneSource(DeviceId),
    #[error("O1 manager {0} is not a session participant")]
    O1ManagerNotParticipant(DeviceId),
    #[error("feature sets have no common value for mandatory key `{key}`")]
    IncompatibleProfile { key: String },
    #[error("plane {0:?} is not the next pending step")]
    OutOfOrderPlane(PlaneStep),
    #[error("plane {0:?} is blocked by an earlier failure")]
    PlaneBlocked(PlaneStep),
}

// ---------------------------------------------------------------------------
// IOT profile matching

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IotProfile {
    pub du_features: FeatureSet,
    pub ru_features: FeatureSet,
    pub common: FeatureSet,
}

/// Key-wise intersection of the two vendors' declared capabilities. Keys
/// missing from either side or with an empty intersection are dropped unless
/// mandatory, in which case the profile is incompatible.
pub fn match_iot_profile(
    du_features: &FeatureSet,
    ru_features: &FeatureSet,
) -> Result<IotProfile, TopologyError> {
    let mandatory = &catalog().mandatory_for_iot;
    let mut common = FeatureSet::new();
    for (key, du_vals) in &du_features.0 {
        if let Some(ru_vals) = ru_features.get(key) {
            let inter: BTreeSet<String> = du_vals.intersection(ru_vals).cloned().collect();
            if !inter.is_empty() {
                common.0.insert(key.clone(), inter);
            }
        }
    }
    for key in mandatory {
        if common.get(key).is_none() {
            return Err(TopologyError::IncompatibleProfile { key: key.clone() });
        }
    }
    Ok(IotProfile {
        du_features: du_features.clone(),
        ru_features: ru_features.clone(),
        common,
    })
}

// ---------------------------------------------------------------------------
// Plane checklist

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneStep {
    MPlane,
    SPlane,
    CuPlane,
    Performance,
}

impl PlaneStep {
    pub const ORDER: [PlaneStep; 4] = [
        PlaneStep::MPlane,
        PlaneStep::SPlane,
        PlaneStep::CuPlane,
        PlaneStep::Performance,
    ];
}

impl std::str::FromStr for PlaneStep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m" | "m_plane" => Ok(PlaneStep::MPlane),
            "s" | "s_plane" => Ok(PlaneStep::SPlane),
            "cu" | "cu_plane" => Ok(PlaneStep::CuPlane),
            "performance" | "perf" => Ok(PlaneStep::Performance),
            other => Err(format!("unknown plane `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneStatus {
    Pending,
    Passed,
    Failed,
}

/// Ordered conformance checklist: management, synchronization, control/user
/// planes, then best-effort performance. A step may only leave `pending`
/// once every earlier step passed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneChecklist {
    statuses: BTreeMap<PlaneStep, PlaneStatus>,
}

impl Default for PlaneChecklist {
    fn default() -> Self {
        Self::new()
    }
}

impl PlaneChecklist {
    pub fn new() -> Self {
        PlaneChecklist {
            statuses: PlaneStep::ORDER
                .iter()
                .map(|s| (*s, PlaneStatus::Pending))
                .collect(),
        }
    }

    pub fn status(&self, step: PlaneStep) -> PlaneStatus {
        self.statuses[&step]
    }

    pub fn advance(&mut self, step: PlaneStep, passed: bool) -> Result<(), TopologyError> {
        for prior in PlaneStep::ORDER {
            if prior == step {
                break;
            }
            match self.statuses[&prior] {
                PlaneStatus::Passed => {}
                PlaneStatus::Pending => return Err(TopologyError::OutOfOrderPlane(step)),
                PlaneStatus::Failed => return Err(TopologyError::PlaneBlocked(step)),
            }
        }
        if self.statuses[&step] != PlaneStatus::Pending {
            return Err(TopologyError::OutOfOrderPlane(step));
        }
        self.statuses.insert(
            step,
            if passed {
                PlaneStatus::Passed
            } else {
                PlaneStatus::Failed
            },
        );
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Template compilation

struct PortPicker<'a> {
    devices: BTreeMap<DeviceId, &'a Device>,
    eth_order: BTreeMap<DeviceId, Vec<PortId>>,
    next_eth: BTreeMap<DeviceId, usize>,
    assigned: BTreeMap<(DeviceId, DeviceId), PortId>,
    rf_used: BTreeSet<PortId>,
}

impl<'a> PortPicker<'a> {
    fn new(inventory: &'a Inventory, devices: &[&'a Device]) -> Self {
        let mut eth_order = BTreeMap::new();
        for dev in devices {
            // Prefer ports already cabled with an access link, then the
            // rest, both in id order.
            let mut wired: Vec<PortId> = Vec::new();
            let mut loose: Vec<PortId> = Vec::new();
            for p in &dev.ports {
                if p.medium != PortMedium::Ethernet {
                    continue;
                }
                match inventory.link_of(p.id) {
                    Some(l) if l.kind == LinkKind::Access => wired.push(p.id),
                    _ => loose.push(p.id),
                }
            }
            wired.extend(loose);
            eth_order.insert(dev.id, wired);
        }
        PortPicker {
            devices: devices.iter().map(|d| (d.id, *d)).collect(),
            eth_order,
            next_eth: BTreeMap::new(),
            assigned: BTreeMap::new(),
            rf_used: BTreeSet::new(),
        }
    }

    /// Ethernet port `dev` uses to face `peer`. Interfaces between the same
    /// device pair share one port; further peers take the next free port, or
    /// stack on the last one when the device runs out.
    fn port_towards(&mut self, dev: DeviceId, peer: DeviceId) -> Result<PortId, TopologyError> {
        if let Some(p) = self.assigned.get(&(dev, peer)) {
            return Ok(*p);
        }
        let order = &self.eth_order[&dev];
        if order.is_empty() {
            return Err(TopologyError::NoEthernetPort(dev));
        }
        let next = self.next_eth.entry(dev).or_insert(0);
        let port = order[(*next).min(order.len() - 1)];
        *next += 1;
        self.assigned.insert((dev, peer), port);
        Ok(port)
    }

    /// A distinct RF port matching the analog mode's medium.
    fn analog_port(&mut self, dev: DeviceId, mode: AnalogMode) -> Result<PortId, TopologyError> {
        let wanted = match mode {
            AnalogMode::Radiated => PortMedium::RfAntenna,
            AnalogMode::Conducted => PortMedium::RfCoaxial,
        };
        let device = self.devices[&dev];
        device
            .ports
            .iter()
            .find(|p| p.medium == wanted && !self.rf_used.contains(&p.id))
            .map(|p| {
                self.rf_used.insert(p.id);
                p.id
            })
            .ok_or(TopologyError::AnalogPortMissing { device: dev, mode })
    }
}

struct Compiler<'a> {
    kind: SessionKind,
    options: &'a SessionOptions,
    buckets: BTreeMap<DeviceKind, Vec<&'a Device>>,
    picker: PortPicker<'a>,
    edges: BTreeSet<DigitalEdge>,
    analog: BTreeSet<AnalogEdge>,
    impairments: Vec<Impairment>,
    impair_device: Option<DeviceId>,
}

impl<'a> Compiler<'a> {
    fn new(
        inventory: &'a Inventory,
        kind: SessionKind,
        participants: &[DeviceId],
        options: &'a SessionOptions,
    ) -> Result<Self, TopologyError> {
        let mut devices: Vec<&Device> = Vec::new();
        let mut ids: Vec<DeviceId> = participants.to_vec();
        ids.sort();
        ids.dedup();
        for id in &ids {
            devices.push(
                inventory
                    .device(*id)
                    .ok_or(TopologyError::UnknownDevice(*id))?,
            );
        }
        let mut buckets: BTreeMap<DeviceKind, Vec<&Device>> = BTreeMap::new();
        for dev in &devices {
            buckets.entry(dev.kind).or_default().push(dev);
        }
        Ok(Compiler {
            kind,
            options,
            buckets,
            picker: PortPicker::new(inventory, &devices),
            edges: BTreeSet::new(),
            analog: BTreeSet::new(),
            impairments: Vec::new(),
            impair_device: None,
        })
    }

    fn take_one(&mut self, kind: DeviceKind, role: DeviceRole) -> Result<&'a Device, TopologyError> {
        let bucket = self.buckets.entry(kind).or_default();
        if bucket.is_empty() {
            return Err(TopologyError::MissingRole {
                kind: self.kind,
                needed: kind,
            });
        }
        let dev = bucket.remove(0);
        if dev.role != role {
            return Err(TopologyError::WrongRole {
                device: dev.id,
                expected: role,
            });
        }
        Ok(dev)
    }

    fn take_all(&mut self, kind: DeviceKind, role: DeviceRole) -> Result<Vec<&'a Device>, TopologyError> {
        let bucket = self.buckets.remove(&kind).unwrap_or_default();
        for dev in &bucket {
            if dev.role != role {
                return Err(TopologyError::WrongRole {
                    device: dev.id,
                    expected: role,
                });
            }
        }
        Ok(bucket)
    }

    fn take_optional(&mut self, kind: DeviceKind) -> Option<&'a Device> {
        let bucket = self.buckets.entry(kind).or_default();
        if bucket.is_empty() {
            None
        } else {
            Some(bucket.remove(0))
        }
    }

    /// Wire one interface between two devices, splitting the edge through
    /// the impairment emulator when requested. Split halves share the VID at
    /// provisioning time; the delay value is metadata only.
    fn connect(
        &mut self,
        a: DeviceId,
        b: DeviceId,
        interface: InterfaceKind,
    ) -> Result<(), TopologyError> {
        if self.options.impair.contains(&interface) {
            let imp = self
                .impair_device
                .ok_or(TopologyError::ImpairmentWithoutDevice(interface))?;
            let pa = self.picker.port_towards(a, imp)?;
            let pia = self.picker.port_towards(imp, a)?;
            let pib = self.picker.port_towards(imp, b)?;
            let pb = self.picker.port_towards(b, imp)?;
            self.edges.insert(DigitalEdge {
                a: pa,
                b: pia,
                interface,
            });
            self.edges.insert(DigitalEdge {
                a: pib,
                b: pb,
                interface,
            });
            self.impairments.push(Impairment {
                interface,
                device: imp,
                delay_us: self.options.impair_delay_us,
            });
        } else {
            let pa = self.picker.port_towards(a, b)?;
            let pb = self.picker.port_towards(b, a)?;
            self.edges.insert(DigitalEdge {
                a: pa,
                b: pb,
                interface,
            });
        }
        Ok(())
    }

    /// The fronthaul pair: M-plane and CU-plane ride distinct VLANs over the
    /// same adjacency.
    fn connect_fronthaul(&mut self, du_side: DeviceId, ru: DeviceId) -> Result<(), TopologyError> {
        self.connect(du_side, ru, InterfaceKind::OfhM)?;
        self.connect(du_side, ru, InterfaceKind::OfhCu)
    }

    fn connect_analog(&mut self, a: DeviceId, b: DeviceId) -> Result<(), TopologyError> {
        let mode = self.options.analog_mode;
        let pa = self.picker.analog_port(a, mode)?;
        let pb = self.picker.analog_port(b, mode)?;
        self.analog.insert(AnalogEdge { a: pa, b: pb, mode });
        Ok(())
    }

    fn validate_impair_set(&mut self) -> Result<(), TopologyError> {
        let allowed: &[InterfaceKind] = match self.kind {
            SessionKind::Wg4Iot => &[InterfaceKind::OfhM, InterfaceKind::OfhCu],
            SessionKind::E2e | SessionKind::E2eMobility => &[
                InterfaceKind::OfhM,
                InterfaceKind::OfhCu,
                InterfaceKind::F1,
                InterfaceKind::Ng,
            ],
            _ => &[],
        };
        for iface in &self.options.impair {
            if !allowed.contains(iface) {
                return Err(TopologyError::ImpairNotAllowed {
                    kind: self.kind,
                    interface: *iface,
                });
            }
        }
        if !self.options.impair.is_empty() {
            let dev = self
                .take_optional(DeviceKind::ImpairmentEmulator)
                .ok_or_else(|| {
                    TopologyError::ImpairmentWithoutDevice(
                        *self.options.impair.iter().next().expect("non-empty"),
                    )
                })?;
            self.impair_device = Some(dev.id);
        }
        Ok(())
    }

    fn resolve_splane(
        &mut self,
        default_device: Option<DeviceId>,
        dut_candidates: &[DeviceId],
        required: bool,
    ) -> Result<Option<SplaneSource>, TopologyError> {
        let tgm = self.take_optional(DeviceKind::TGm).map(|d| d.id);
        match self.options.splane_source {
            Some(SplaneSource::External) => Ok(Some(SplaneSource::External)),
            Some(SplaneSource::Device(id)) => {
                let valid = Some(id) == tgm
                    || Some(id) == default_device
                    || dut_candidates.contains(&id);
                if !valid {
                    return Err(TopologyError::InvalidSplaneSource(id));
                }
                Ok(Some(SplaneSource::Device(id)))
            }
            None => {
                if let Some(tgm) = tgm {
                    return Ok(Some(SplaneSource::Device(tgm)));
                }
                if let Some(dev) = default_device {
                    return Ok(Some(SplaneSource::Device(dev)));
                }
                if required {
                    return Err(TopologyError::MissingSplaneSource(self.kind));
                }
                Ok(None)
            }
        }
    }

    fn attach_o1_overlay(&mut self, duts: &[DeviceId]) -> Result<(), TopologyError> {
        if let Some(manager) = self.options.o1_manager {
            if !self.picker.devices.contains_key(&manager) {
                return Err(TopologyError::O1ManagerNotParticipant(manager));
            }
            for dut in duts {
                if *dut != manager {
                    self.connect(manager, *dut, InterfaceKind::O1)?;
                }
            }
        }
        Ok(())
    }

    fn finish(
        mut self,
        splane: Option<SplaneSource>,
        duts: &[DeviceId],
    ) -> Result<LogicalTopology, TopologyError> {
        self.attach_o1_overlay(duts)?;
        // O1 manager devices are legitimate leftovers; everything else
        // unconsumed means the participant list does not fit the template.
        for (kind, bucket) in &self.buckets {
            for dev in bucket {
                if Some(dev.id) == self.options.o1_manager {
                    continue;
                }
                return Err(TopologyError::WrongDeviceKind {
                    device: dev.id,
                    kind: *kind,
                });
            }
        }
        Ok(LogicalTopology {
            digital_edges: self.edges,
            analog_edges: self.analog,
            impairments: self.impairments,
            splane_source: splane,
        })
    }
}

pub fn compile(
    inventory: &Inventory,
    kind: SessionKind,
    participants: &[DeviceId],
    options: &SessionOptions,
) -> Result<LogicalTopology, TopologyError> {
    let mut c = Compiler::new(inventory, kind, participants, options)?;
    c.validate_impair_set()?;
    match kind {
        SessionKind::RuConformance => {
            let ru = c.take_one(DeviceKind::Ru, DeviceRole::Dut)?.id;
            let du_emu = c.take_one(DeviceKind::DuEmulator, DeviceRole::Te)?.id;
            let vst = c.take_one(DeviceKind::Vst, DeviceRole::Te)?.id;
            c.connect_fronthaul(du_emu, ru)?;
            c.connect_analog(ru, vst)?;
            let splane = c.resolve_splane(Some(du_emu), &[], true)?;
            c.finish(splane, &[ru])
        }
        SessionKind::DuConformance => {
            let du = c.take_one(DeviceKind::Du, DeviceRole::Dut)?.id;
            let ru_ue_emu = c.take_one(DeviceKind::RuUeEmulator, DeviceRole::Te)?.id;
            let core = c.take_one(DeviceKind::CoreEmulator, DeviceRole::Te)?.id;
            c.connect_fronthaul(ru_ue_emu, du)?;
            // The DU's upper stack terminates in an integrated CU+core
            // emulation over NG.
            c.connect(du, core, InterfaceKind::Ng)?;
            let splane = c.resolve_splane(Some(ru_ue_emu), &[], true)?;
            c.finish(splane, &[du])
        }
        SessionKind::Wg4Iot => {
            let ru = c.take_one(DeviceKind::Ru, DeviceRole::Dut)?.id;
            let du = c.take_one(DeviceKind::Du, DeviceRole::Dut)?.id;
            let ue = c.take_one(DeviceKind::UeEmulator, DeviceRole::Te)?.id;
            let cu_core = c.take_one(DeviceKind::CoreEmulator, DeviceRole::Te)?.id;
            c.connect_analog(ue, ru)?;
            c.connect_fronthaul(du, ru)?;
            c.connect(du, cu_core, InterfaceKind::F1)?;
            let splane = c.resolve_splane(None, &[ru, du], true)?;
            c.finish(splane, &[ru, du])
        }
        SessionKind::Wg5Iot => {
            let cu = c.take_one(DeviceKind::Cu, DeviceRole::Dut)?.id;
            let du = c.take_one(DeviceKind::Du, DeviceRole::Dut)?.id;
            c.connect(cu, du, InterfaceKind::F1)?;
            for iface in &options.wg5_interfaces {
                match iface {
                    InterfaceKind::E1 | InterfaceKind::X2 | InterfaceKind::Xn => {
                        c.connect(cu, du, *iface)?;
                    }
                    other => return Err(TopologyError::WrongWg5Interface(*other)),
                }
            }
            let splane = c.resolve_splane(None, &[cu, du], false)?;
            c.finish(splane, &[cu, du])
        }
        SessionKind::E2e | SessionKind::E2eMobility => {
            let ue = c.take_one(DeviceKind::UeEmulator, DeviceRole::Te)?.id;
            let core = c.take_one(DeviceKind::CoreEmulator, DeviceRole::Te)?.id;
            let rus: Vec<DeviceId> = c
                .take_all(DeviceKind::Ru, DeviceRole::Dut)?
                .iter()
                .map(|d| d.id)
                .collect();
            let dus: Vec<DeviceId> = c
                .take_all(DeviceKind::Du, DeviceRole::Dut)?
                .iter()
                .map(|d| d.id)
                .collect();
            let cu = c.take_one(DeviceKind::Cu, DeviceRole::Dut)?.id;
            if rus.is_empty() {
                return Err(TopologyError::MissingRole {
                    kind,
                    needed: DeviceKind::Ru,
                });
            }
            if dus.is_empty() {
                return Err(TopologyError::MissingRole {
                    kind,
                    needed: DeviceKind::Du,
                });
            }
            if kind == SessionKind::E2eMobility && rus.len() < 2 {
                return Err(TopologyError::MobilityNeedsMultipleRus);
            }
            if dus.len() != 1 && dus.len() != rus.len() {
                return Err(TopologyError::MismatchedPairing {
                    rus: rus.len(),
                    dus: dus.len(),
                });
            }
            let mut duts: Vec<DeviceId> = vec![cu];
            for (i, ru) in rus.iter().enumerate() {
                let du = if dus.len() == 1 { dus[0] } else { dus[i] };
                c.connect_analog(ue, *ru)?;
                c.connect_fronthaul(du, *ru)?;
                duts.push(*ru);
            }
            for du in &dus {
                c.connect(*du, cu, InterfaceKind::F1)?;
                duts.push(*du);
            }
            c.connect(cu, core, InterfaceKind::Ng)?;
            let mut candidates = rus.clone();
            candidates.extend(&dus);
            candidates.push(cu);
            let splane = c.resolve_splane(None, &candidates, false)?;
            c.finish(splane, &duts)
        }
    }
}
