//! Deterministic switch-configuration documents and the driver boundary.
//!
//! Exports render the engine's derived port table into one document per
//! switch: every port listed, unconfigured ports shut down. A
//! [`SwitchDriver`] turns documents back into a [`FabricModel`]; only the
//! simulated driver exists here, but the trait is the seam where a real
//! NOS-API driver would plug in (same documents, same apply contract).

use std::collections::{BTreeMap, BTreeSet};

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::engine::EngineState;
use crate::fabric::{build_fabric, FabricError, FabricModel, PortConfig, PortMode};
use crate::ids::{PortId, SessionId, SwitchId};
use crate::inventory::{Inventory, PortOwner};
use crate::ipam::NetClass;

pub const CONFIG_DOC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchPortEntry {
    pub name: String,
    /// `access`, `trunk` or `shutdown`.
    pub mode: String,
    #[serde(default)]
    pub vids: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchConfigDocument {
    pub version: u32,
    pub switch_id: SwitchId,
    pub ports: Vec<SwitchPortEntry>,
    pub generated_from: Vec<SessionId>,
}

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("unknown switch {0}")]
    UnknownSwitch(SwitchId),
    #[error("switch {switch} has no port named `{name}`")]
    UnknownPortName { switch: SwitchId, name: String },
    #[error("port {port} mode `{mode}` is invalid: {reason}")]
    BadMode {
        port: String,
        mode: String,
        reason: String,
    },
    #[error("unsupported document version {0}")]
    BadVersion(u32),
    #[error(transparent)]
    Fabric(#[from] FabricError),
}

/// One document per switch, ports in id order, default-deny: a port with no
/// session-derived configuration is rendered shut down.
pub fn export_switch_configs(state: &EngineState) -> Vec<SwitchConfigDocument> {
    let table = state.port_table();
    state
        .inventory
        .switches()
        .map(|switch| {
            let ports = switch
                .ports
                .iter()
                .map(|port| match table.get(&port.id).map(|c| &c.mode) {
                    Some(PortMode::Access(vid)) => SwitchPortEntry {
                        name: port.name.clone(),
                        mode: "access".into(),
                        vids: vec![*vid],
                    },
                    Some(PortMode::Trunk(vids)) => SwitchPortEntry {
                        name: port.name.clone(),
                        mode: "trunk".into(),
                        vids: vids.iter().copied().collect(),
                    },
                    Some(PortMode::Shutdown) | None => SwitchPortEntry {
                        name: port.name.clone(),
                        mode: "shutdown".into(),
                        vids: Vec::new(),
                    },
                })
                .collect();
            let switch_ports: BTreeSet<PortId> = switch.ports.iter().map(|p| p.id).collect();
            let generated_from = state
                .sessions
                .values()
                .filter(|s| s.holds_resources())
                .filter(|s| {
                    s.allocations
                        .as_ref()
                        .is_some_and(|a| a.port_vids.keys().any(|p| switch_ports.contains(p)))
                })
                .map(|s| s.id)
                .collect();
            SwitchConfigDocument {
                version: CONFIG_DOC_VERSION,
                switch_id: switch.id,
                ports,
                generated_from,
            }
        })
        .collect()
}

/// The boundary a real switch driver would implement: take the exported
/// documents (plus the device-side attachments, which are not switch
/// configuration) and produce the resulting fabric model.
pub trait SwitchDriver {
    fn apply(
        &self,
        inventory: &Inventory,
        docs: &[SwitchConfigDocument],
        device_configs: &[PortConfig],
        active_vids: &BTreeSet<u16>,
        known_subnets: BTreeMap<Ipv4Net, NetClass>,
    ) -> Result<FabricModel, DriverError>;
}

/// Driver backed by the embedded fabric simulator.
pub struct SimDriver;

impl SwitchDriver for SimDriver {
    fn apply(
        &self,
        inventory: &Inventory,
        docs: &[SwitchConfigDocument],
        device_configs: &[PortConfig],
        active_vids: &BTreeSet<u16>,
        known_subnets: BTreeMap<Ipv4Net, NetClass>,
    ) -> Result<FabricModel, DriverError> {
        let mut configs: Vec<PortConfig> = device_configs.to_vec();
        for doc in docs {
            if doc.version != CONFIG_DOC_VERSION {
                return Err(DriverError::BadVersion(doc.version));
            }
            let switch = inventory
                .switch(doc.switch_id)
                .ok_or(DriverError::UnknownSwitch(doc.switch_id))?;
            for entry in &doc.ports {
                let port = switch
                    .ports
                    .iter()
                    .find(|p| p.name == entry.name)
                    .ok_or_else(|| DriverError::UnknownPortName {
                        switch: doc.switch_id,
                        name: entry.name.clone(),
                    })?;
                let mode = match entry.mode.as_str() {
                    "shutdown" => continue,
                    "access" => {
                        if entry.vids.len() != 1 {
                            return Err(DriverError::BadMode {
                                port: entry.name.clone(),
                                mode: entry.mode.clone(),
                                reason: "access mode takes exactly one VID".into(),
                            });
                        }
                        PortMode::Access(entry.vids[0])
                    }
                    "trunk" => PortMode::Trunk(entry.vids.iter().copied().collect()),
                    other => {
                        return Err(DriverError::BadMode {
                            port: entry.name.clone(),
                            mode: other.to_string(),
                            reason: "expected access, trunk or shutdown".into(),
                        })
                    }
                };
                configs.push(PortConfig {
                    port: port.id,
                    mode,
                    oob: false,
                });
            }
        }
        Ok(build_fabric(inventory, &configs, active_vids, known_subnets)?)
    }
}

impl EngineState {
    /// Port configurations on device-owned ports, the half of the derived
    /// table that is not switch configuration.
    pub fn device_port_configs(&self) -> Vec<PortConfig> {
        self.port_table()
            .into_values()
            .filter(|c| {
                matches!(
                    self.inventory.port_owner(c.port),
                    Some(PortOwner::Device(_))
                )
            })
            .collect()
    }

    /// Rebuild the fabric by pushing the exported documents through the
    /// simulated driver. Equivalent to [`EngineState::current_fabric`] by
    /// construction; the acceptance suite checks that over random states.
    pub fn fabric_via_driver(&self) -> Result<FabricModel, DriverError> {
        let docs = export_switch_configs(self);
        SimDriver.apply(
            &self.inventory,
            &docs,
            &self.device_port_configs(),
            &self.active_vid_set(),
            self.plan
                .as_ref()
                .map(|p| p.known_subnets())
                .unwrap_or_default(),
        )
    }
}
