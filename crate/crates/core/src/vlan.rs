//! 802.1Q VLAN id allocation.
//!
//! VIDs 0 (priority tag), 1 (switch default) and 4095 are reserved by
//! convention and never handed out, leaving 4093 usable ids in [2..=4094].
//! Allocation is first-fit on the lowest free id, keyed by a purpose triple
//! so the same demand is never double-provisioned.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::SessionId;
use crate::ipam::InterfaceKind;

pub const VID_MIN: u16 = 2;
pub const VID_MAX: u16 = 4094;
/// Number of simultaneously allocatable VIDs.
pub const VID_CAPACITY: usize = (VID_MAX - VID_MIN + 1) as usize;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    M,
    CuC,
    CuU,
}

/// What a VID was allocated for. One VID per (interface, session) by
/// default; `plane` is set only when a template demands plane separation.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct VidPurpose {
    pub interface: InterfaceKind,
    pub session: SessionId,
    pub plane: Option<Plane>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VlanError {
    #[error("analog interface {0} cannot carry a VLAN")]
    AnalogInterface(InterfaceKind),
    #[error("purpose already holds VID {0}")]
    DuplicatePurpose(u16),
    #[error("VLAN id pool exhausted")]
    Exhausted,
    #[error("VID {0} is reserved")]
    Reserved(u16),
    #[error("VID {0} is not active")]
    NotActive(u16),
    #[error("VID {0} is still referenced by a port configuration")]
    StillReferenced(u16),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VlanPoolDoc", into = "VlanPoolDoc")]
pub struct VlanPool {
    active: BTreeMap<u16, VidPurpose>,
    // Derived; rebuilt on deserialize.
    free: BTreeSet<u16>,
    by_purpose: BTreeMap<VidPurpose, u16>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VlanPoolDoc {
    active: BTreeMap<u16, VidPurpose>,
}

impl From<VlanPool> for VlanPoolDoc {
    fn from(pool: VlanPool) -> Self {
        VlanPoolDoc {
            active: pool.active,
        }
    }
}

impl From<VlanPoolDoc> for VlanPool {
    fn from(doc: VlanPoolDoc) -> Self {
        let mut pool = VlanPool::new();
        for (vid, purpose) in doc.active {
            pool.free.remove(&vid);
            pool.by_purpose.insert(purpose, vid);
            pool.active.insert(vid, purpose);
        }
        pool
    }
}

impl VlanPool {
    pub fn new() -> Self {
        VlanPool {
            active: BTreeMap::new(),
            free: (VID_MIN..=VID_MAX).collect(),
            by_purpose: BTreeMap::new(),
        }
    }

    pub fn allocate(&mut self, purpose: VidPurpose) -> Result<u16, VlanError> {
        if purpose.interface.is_analog() {
            return Err(VlanError::AnalogInterface(purpose.interface));
        }
        if let Some(vid) = self.by_purpose.get(&purpose) {
            return Err(VlanError::DuplicatePurpose(*vid));
        }
        let vid = *self.free.iter().next().ok_or(VlanError::Exhausted)?;
        self.free.remove(&vid);
        self.active.insert(vid, purpose);
        self.by_purpose.insert(purpose, vid);
        Ok(vid)
    }

    /// Return a VID to the pool. `referenced` reports whether any port
    /// configuration still carries it.
    pub fn release(
        &mut self,
        vid: u16,
        referenced: &dyn Fn(u16) -> bool,
    ) -> Result<(), VlanError> {
        if !(VID_MIN..=VID_MAX).contains(&vid) {
            return Err(VlanError::Reserved(vid));
        }
        let purpose = *self.active.get(&vid).ok_or(VlanError::NotActive(vid))?;
        if referenced(vid) {
            return Err(VlanError::StillReferenced(vid));
        }
        self.active.remove(&vid);
        self.by_purpose.remove(&purpose);
        self.free.insert(vid);
        Ok(())
    }

    pub fn lookup(&self, purpose: &VidPurpose) -> Option<u16> {
        self.by_purpose.get(purpose).copied()
    }

    pub fn purpose_of(&self, vid: u16) -> Option<&VidPurpose> {
        self.active.get(&vid)
    }

    pub fn is_active(&self, vid: u16) -> bool {
        self.active.contains_key(&vid)
    }

    pub fn active_vids(&self) -> impl Iterator<Item = u16> + '_ {
        self.active.keys().copied()
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// VIDs held by one session, across all purposes.
    pub fn vids_of_session(&self, session: SessionId) -> Vec<u16> {
        self.active
            .iter()
            .filter(|(_, p)| p.session == session)
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for vid in self.active.keys() {
            if !(VID_MIN..=VID_MAX).contains(vid) {
                return Err(format!("active VID {vid} outside [2..=4094]"));
            }
            if self.free.contains(vid) {
                return Err(format!("VID {vid} both active and free"));
            }
        }
        if self.active.len() + self.free.len() != VID_CAPACITY {
            return Err("pool conservation violated".into());
        }
        Ok(())
    }
}
