//! The /16 segmentation blueprint and its allocators.
//!
//! Layout (third octet of the facility /16):
//!
//! | octet    | network                                   | routable |
//! |----------|-------------------------------------------|----------|
//! | 0        | out-of-band                               | yes      |
//! | 1        | management                                | yes      |
//! | 2        | services                                  | yes      |
//! | 4..=100  | tenant /24 pool (first-fit)               | yes      |
//! | 101      | F1                                        | no       |
//! | 102      | NG                                        | no       |
//! | 103      | O1                                        | no       |
//! | 104      | E1                                        | no       |
//! | 105      | fronthaul M-plane                         | yes      |
//! | 106      | X2                                        | no       |
//! | 107      | Xn                                        | no       |
//!
//! The fronthaul CU-plane is L2-only and the Uu air interface is analog;
//! neither owns a subnet. Tenant /24s carve a /26 management net at offset 0,
//! a /27 OOB net at .128 and a /29 VPN net at .160. Each 5G data /24 keeps a
//! shared /26 at offset 0 and hands out per-test /29s first-fit from .64.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use crate::ids::{SessionId, TenantId};

/// Lowest third octet handed to tenants.
pub const TENANT_OCTET_FIRST: u8 = 4;
/// Highest third octet handed to tenants; 101.. belong to the 5G data nets.
pub const TENANT_OCTET_LAST: u8 = 100;
/// First host-octet offset available for per-test /29 blocks.
pub const TEST_BLOCK_FIRST_OFFSET: u8 = 64;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    F1,
    Ng,
    O1,
    E1,
    OfhM,
    OfhCu,
    X2,
    Xn,
    UuAnalog,
}

impl InterfaceKind {
    pub const ALL: [InterfaceKind; 9] = [
        InterfaceKind::F1,
        InterfaceKind::Ng,
        InterfaceKind::O1,
        InterfaceKind::E1,
        InterfaceKind::OfhM,
        InterfaceKind::OfhCu,
        InterfaceKind::X2,
        InterfaceKind::Xn,
        InterfaceKind::UuAnalog,
    ];

    /// Third octet of this interface's data network, if it has one.
    pub fn data_net_octet(self) -> Option<u8> {
        match self {
            InterfaceKind::F1 => Some(101),
            InterfaceKind::Ng => Some(102),
            InterfaceKind::O1 => Some(103),
            InterfaceKind::E1 => Some(104),
            InterfaceKind::OfhM => Some(105),
            InterfaceKind::X2 => Some(106),
            InterfaceKind::Xn => Some(107),
            InterfaceKind::OfhCu | InterfaceKind::UuAnalog => None,
        }
    }

    pub fn has_subnet(self) -> bool {
        self.data_net_octet().is_some()
    }

    /// Carries frames but no IP subnet.
    pub fn is_l2_only(self) -> bool {
        self == InterfaceKind::OfhCu
    }

    /// RF path: no subnet and no VLAN either.
    pub fn is_analog(self) -> bool {
        self == InterfaceKind::UuAnalog
    }

    /// Routability of the interface's data network. Only the fronthaul
    /// M-plane is attached to the routed core.
    pub fn routable(self) -> bool {
        self == InterfaceKind::OfhM
    }
}

impl fmt::Display for InterfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InterfaceKind::F1 => "F1",
            InterfaceKind::Ng => "NG",
            InterfaceKind::O1 => "O1",
            InterfaceKind::E1 => "E1",
            InterfaceKind::OfhM => "OFH-M",
            InterfaceKind::OfhCu => "OFH-CU",
            InterfaceKind::X2 => "X2",
            InterfaceKind::Xn => "Xn",
            InterfaceKind::UuAnalog => "Uu",
        };
        f.write_str(s)
    }
}

impl FromStr for InterfaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(InterfaceKind::F1),
            "ng" => Ok(InterfaceKind::Ng),
            "o1" => Ok(InterfaceKind::O1),
            "e1" => Ok(InterfaceKind::E1),
            "ofh-m" | "ofh_m" | "ofhm" => Ok(InterfaceKind::OfhM),
            "ofh-cu" | "ofh_cu" | "ofhcu" => Ok(InterfaceKind::OfhCu),
            "x2" => Ok(InterfaceKind::X2),
            "xn" => Ok(InterfaceKind::Xn),
            "uu" | "uu_analog" => Ok(InterfaceKind::UuAnalog),
            other => Err(format!("unknown interface kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OticNet {
    Oob,
    Management,
    Services,
}

impl OticNet {
    pub const ALL: [OticNet; 3] = [OticNet::Oob, OticNet::Management, OticNet::Services];

    pub fn octet(self) -> u8 {
        match self {
            OticNet::Oob => 0,
            OticNet::Management => 1,
            OticNet::Services => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarveKind {
    Management,
    Oob,
    Vpn,
}

/// The fixed subdivision of a tenant /24.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarvedSubnets {
    pub management: Ipv4Net,
    pub oob: Ipv4Net,
    pub vpn: Ipv4Net,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantBlock {
    pub tenant: TenantId,
    pub block: Ipv4Net,
    pub carved: Option<CarvedSubnets>,
}

impl TenantBlock {
    /// Host ranges of the /24 left over after the fixed carvings, available
    /// for tenant-specific subnets.
    pub fn free_ranges(&self) -> Vec<(u8, u8)> {
        if self.carved.is_some() {
            vec![(64, 127), (168, 255)]
        } else {
            vec![(0, 255)]
        }
    }
}

/// Per-interface 5G data network with its test-block allocator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataNetAllocation {
    pub interface: InterfaceKind,
    pub net: Ipv4Net,
    /// Offset -> owning session for the allocated /29 test blocks.
    pub test_blocks: BTreeMap<u8, SessionId>,
}

impl DataNetAllocation {
    pub fn shared(&self) -> Ipv4Net {
        Ipv4Net::new(self.net.addr(), 26).expect("/26 inside /24")
    }

    fn block_at(&self, offset: u8) -> Ipv4Net {
        let base = u32::from(self.net.addr());
        Ipv4Net::new(Ipv4Addr::from(base + u32::from(offset)), 29).expect("/29 inside /24")
    }

    fn offsets() -> impl Iterator<Item = u8> {
        (TEST_BLOCK_FIRST_OFFSET..=248).step_by(8)
    }
}

/// How a subnet fits into the blueprint; drives routability and the L3
/// isolation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetClass {
    Otic(OticNet),
    TenantBlock(TenantId),
    TenantCarve(TenantId, CarveKind),
    DataNet(InterfaceKind),
    DataShared(InterfaceKind),
    DataTest(InterfaceKind, SessionId),
}

impl NetClass {
    pub fn tenant(self) -> Option<TenantId> {
        match self {
            NetClass::TenantBlock(t) | NetClass::TenantCarve(t, _) => Some(t),
            _ => None,
        }
    }

    pub fn routable(self) -> bool {
        match self {
            NetClass::Otic(_) | NetClass::TenantBlock(_) | NetClass::TenantCarve(..) => true,
            NetClass::DataNet(i) | NetClass::DataShared(i) | NetClass::DataTest(i, _) => {
                i.routable()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IpamError {
    #[error("base prefix {0} is not a /16")]
    NotSlash16(Ipv4Net),
    #[error("tenant {0} already holds a /24 block")]
    TenantHasBlock(TenantId),
    #[error("tenant /24 pool exhausted")]
    TenantPoolExhausted,
    #[error("tenant {0} holds no /24 block")]
    NoTenantBlock(TenantId),
    #[error("tenant {0} block already carved")]
    AlreadyCarved(TenantId),
    #[error("interface {0} has no IP subnet")]
    NoSubnetForInterface(InterfaceKind),
    #[error("no free /29 left in the {0} data network")]
    TestSpaceExhausted(InterfaceKind),
    #[error("subnet {0} is not an active allocation")]
    UnknownAllocation(Ipv4Net),
    #[error("subnet {0} is still referenced by session {1}")]
    StillReferenced(Ipv4Net, SessionId),
    #[error("subnet {0} is not part of the plan")]
    UnknownSubnet(Ipv4Net),
}

/// The address plan plus all allocation state derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressPlan {
    base: Ipv4Net,
    tenant_blocks: BTreeMap<TenantId, TenantBlock>,
    data_nets: BTreeMap<InterfaceKind, DataNetAllocation>,
}

impl AddressPlan {
    pub fn init(base: Ipv4Net) -> Result<Self, IpamError> {
        if base.prefix_len() != 16 {
            return Err(IpamError::NotSlash16(base));
        }
        let base = base.trunc();
        let mut plan = AddressPlan {
            base,
            tenant_blocks: BTreeMap::new(),
            data_nets: BTreeMap::new(),
        };
        for kind in InterfaceKind::ALL {
            if let Some(octet) = kind.data_net_octet() {
                plan.data_nets.insert(
                    kind,
                    DataNetAllocation {
                        interface: kind,
                        net: plan.slash24(octet),
                        test_blocks: BTreeMap::new(),
                    },
                );
            }
        }
        Ok(plan)
    }

    pub fn base(&self) -> Ipv4Net {
        self.base
    }

    fn slash24(&self, third_octet: u8) -> Ipv4Net {
        let [a, b, _, _] = self.base.addr().octets();
        Ipv4Net::new(Ipv4Addr::new(a, b, third_octet, 0), 24).expect("/24 inside /16")
    }

    pub fn otic_net(&self, net: OticNet) -> Ipv4Net {
        self.slash24(net.octet())
    }

    pub fn data_net(&self, interface: InterfaceKind) -> Option<Ipv4Net> {
        self.data_nets.get(&interface).map(|d| d.net)
    }

    pub fn tenant_block(&self, tenant: TenantId) -> Option<&TenantBlock> {
        self.tenant_blocks.get(&tenant)
    }

    pub fn tenant_blocks(&self) -> impl Iterator<Item = &TenantBlock> {
        self.tenant_blocks.values()
    }

    pub fn data_allocations(&self) -> impl Iterator<Item = &DataNetAllocation> {
        self.data_nets.values()
    }

    /// First-fit /24 for a tenant from the pool of third octets
    /// [`TENANT_OCTET_FIRST`]..=[`TENANT_OCTET_LAST`].
    pub fn allocate_tenant_block(&mut self, tenant: TenantId) -> Result<Ipv4Net, IpamError> {
        if self.tenant_blocks.contains_key(&tenant) {
            return Err(IpamError::TenantHasBlock(tenant));
        }
        let used: BTreeSet<u8> = self
            .tenant_blocks
            .values()
            .map(|b| b.block.addr().octets()[2])
            .collect();
        let octet = (TENANT_OCTET_FIRST..=TENANT_OCTET_LAST)
            .find(|o| !used.contains(o))
            .ok_or(IpamError::TenantPoolExhausted)?;
        let block = self.slash24(octet);
        self.tenant_blocks.insert(
            tenant,
            TenantBlock {
                tenant,
                block,
                carved: None,
            },
        );
        Ok(block)
    }

    /// Carve the fixed management /26, OOB /27 and VPN /29 out of a tenant's
    /// block. Offsets are always 0, 128 and 160.
    pub fn carve_tenant_subnets(&mut self, tenant: TenantId) -> Result<&TenantBlock, IpamError> {
        let entry = self
            .tenant_blocks
            .get_mut(&tenant)
            .ok_or(IpamError::NoTenantBlock(tenant))?;
        if entry.carved.is_some() {
            return Err(IpamError::AlreadyCarved(tenant));
        }
        let base = u32::from(entry.block.addr());
        let at = |offset: u32, len: u8| {
            Ipv4Net::new(Ipv4Addr::from(base + offset), len).expect("carve inside /24")
        };
        entry.carved = Some(CarvedSubnets {
            management: at(0, 26),
            oob: at(128, 27),
            vpn: at(160, 29),
        });
        Ok(entry)
    }

    pub fn release_tenant_block(&mut self, tenant: TenantId) -> Result<(), IpamError> {
        self.tenant_blocks
            .remove(&tenant)
            .map(|_| ())
            .ok_or(IpamError::NoTenantBlock(tenant))
    }

    /// Lowest free /29 at or above offset 64 in the interface's data /24.
    pub fn allocate_test_subnet(
        &mut self,
        interface: InterfaceKind,
        session: SessionId,
    ) -> Result<Ipv4Net, IpamError> {
        let data = self
            .data_nets
            .get_mut(&interface)
            .ok_or(IpamError::NoSubnetForInterface(interface))?;
        let offset = DataNetAllocation::offsets()
            .find(|o| !data.test_blocks.contains_key(o))
            .ok_or(IpamError::TestSpaceExhausted(interface))?;
        data.test_blocks.insert(offset, session);
        Ok(data.block_at(offset))
    }

    /// The /26 at offset 0 of the interface's data /24, shared across
    /// tenants (Plugfest-style access).
    pub fn shared_subnet(&self, interface: InterfaceKind) -> Result<Ipv4Net, IpamError> {
        self.data_nets
            .get(&interface)
            .map(|d| d.shared())
            .ok_or(IpamError::NoSubnetForInterface(interface))
    }

    pub fn owner_of_test_subnet(&self, subnet: Ipv4Net) -> Option<SessionId> {
        let (data, offset) = self.locate_test_block(subnet)?;
        data.test_blocks.get(&offset).copied()
    }

    fn locate_test_block(&self, subnet: Ipv4Net) -> Option<(&DataNetAllocation, u8)> {
        if subnet.prefix_len() != 29 {
            return None;
        }
        let octets = subnet.addr().octets();
        let data = self
            .data_nets
            .values()
            .find(|d| d.net.contains(&subnet.addr()) && d.net.addr().octets()[2] == octets[2])?;
        Some((data, octets[3]))
    }

    /// Return a /29 test block to the pool. `is_active` reports whether a
    /// session still holds resources; a block owned by an active session
    /// cannot be released out from under it.
    pub fn release_test_subnet(
        &mut self,
        subnet: Ipv4Net,
        is_active: &dyn Fn(SessionId) -> bool,
    ) -> Result<(), IpamError> {
        let offset = {
            let (data, offset) = self
                .locate_test_block(subnet)
                .ok_or(IpamError::UnknownAllocation(subnet))?;
            let owner = *data
                .test_blocks
                .get(&offset)
                .ok_or(IpamError::UnknownAllocation(subnet))?;
            if is_active(owner) {
                return Err(IpamError::StillReferenced(subnet, owner));
            }
            offset
        };
        let octets = subnet.addr().octets();
        let data = self
            .data_nets
            .values_mut()
            .find(|d| d.net.addr().octets()[2] == octets[2])
            .expect("located above");
        data.test_blocks.remove(&offset);
        Ok(())
    }

    /// Release every test block owned by `session`. Used by teardown, where
    /// the owning session is the one being dismantled.
    pub fn release_session_blocks(&mut self, session: SessionId) {
        for data in self.data_nets.values_mut() {
            data.test_blocks.retain(|_, owner| *owner != session);
        }
    }

    /// Classify a subnet the plan knows about: the fixed facility nets, the
    /// data nets with their shared /26s and allocated /29s, and tenant
    /// blocks with their carvings.
    pub fn classify(&self, subnet: Ipv4Net) -> Option<NetClass> {
        for net in OticNet::ALL {
            if subnet == self.otic_net(net) {
                return Some(NetClass::Otic(net));
            }
        }
        for data in self.data_nets.values() {
            if subnet == data.net {
                return Some(NetClass::DataNet(data.interface));
            }
            if subnet == data.shared() {
                return Some(NetClass::DataShared(data.interface));
            }
        }
        if let Some((data, offset)) = self.locate_test_block(subnet) {
            if let Some(session) = data.test_blocks.get(&offset) {
                return Some(NetClass::DataTest(data.interface, *session));
            }
        }
        for block in self.tenant_blocks.values() {
            if subnet == block.block {
                return Some(NetClass::TenantBlock(block.tenant));
            }
            if let Some(carved) = &block.carved {
                if subnet == carved.management {
                    return Some(NetClass::TenantCarve(block.tenant, CarveKind::Management));
                }
                if subnet == carved.oob {
                    return Some(NetClass::TenantCarve(block.tenant, CarveKind::Oob));
                }
                if subnet == carved.vpn {
                    return Some(NetClass::TenantCarve(block.tenant, CarveKind::Vpn));
                }
            }
        }
        None
    }

    /// Routability flag for a known subnet or interface data net.
    pub fn is_routable(&self, subnet: Ipv4Net) -> Result<bool, IpamError> {
        self.classify(subnet)
            .map(NetClass::routable)
            .ok_or(IpamError::UnknownSubnet(subnet))
    }

    /// Every subnet the plan currently defines, with its class. Feeds the
    /// fabric's router model.
    pub fn known_subnets(&self) -> BTreeMap<Ipv4Net, NetClass> {
        let mut out = BTreeMap::new();
        for net in OticNet::ALL {
            out.insert(self.otic_net(net), NetClass::Otic(net));
        }
        for data in self.data_nets.values() {
            out.insert(data.net, NetClass::DataNet(data.interface));
            out.insert(data.shared(), NetClass::DataShared(data.interface));
            for (offset, session) in &data.test_blocks {
                out.insert(
                    data.block_at(*offset),
                    NetClass::DataTest(data.interface, *session),
                );
            }
        }
        for block in self.tenant_blocks.values() {
            out.insert(block.block, NetClass::TenantBlock(block.tenant));
            if let Some(carved) = &block.carved {
                out.insert(
                    carved.management,
                    NetClass::TenantCarve(block.tenant, CarveKind::Management),
                );
                out.insert(
                    carved.oob,
                    NetClass::TenantCarve(block.tenant, CarveKind::Oob),
                );
                out.insert(
                    carved.vpn,
                    NetClass::TenantCarve(block.tenant, CarveKind::Vpn),
                );
            }
        }
        out
    }

    /// All currently allocated, mutually-disjoint leaf subnets: tenant /24s
    /// and /29 test blocks. Property tests check pairwise disjointness.
    pub fn allocated_leaves(&self) -> Vec<Ipv4Net> {
        let mut out: Vec<Ipv4Net> = self
            .tenant_blocks
            .values()
            .map(|b| b.block)
            .collect();
        for data in self.data_nets.values() {
            for offset in data.test_blocks.keys() {
                out.push(data.block_at(*offset));
            }
        }
        out
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for block in self.tenant_blocks.values() {
            let octet = block.block.addr().octets()[2];
            if !(TENANT_OCTET_FIRST..=TENANT_OCTET_LAST).contains(&octet) {
                return Err(format!("tenant block {} outside pool", block.block));
            }
            if let Some(c) = &block.carved {
                let inside = |n: Ipv4Net| block.block.contains(&n.addr());
                if !(inside(c.management) && inside(c.oob) && inside(c.vpn)) {
                    return Err(format!("carvings escape block {}", block.block));
                }
            }
        }
        let leaves = self.allocated_leaves();
        for (i, a) in leaves.iter().enumerate() {
            for b in &leaves[i + 1..] {
                if a.contains(&b.addr()) || b.contains(&a.addr()) {
                    return Err(format!("allocations {a} and {b} overlap"));
                }
            }
        }
        Ok(())
    }
}
