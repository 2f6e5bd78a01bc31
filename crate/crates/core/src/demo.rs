//! A ready-made example facility: two sites, two switches joined by a
//! 100 GbE trunk, three tenants, and the device population for three
//! parallel test sessions (a conducted end-to-end run, a DU conformance
//! run, and a radiated RU conformance run).
//!
//! Used by the documentation, the integration and acceptance suites, and
//! the fuzz corpus generator. Also home to a small deterministic
//! random-fabric generator for reachability testing.

use std::collections::BTreeSet;

use crate::engine::{Command, Engine, Output};
use crate::fabric::{PortConfig, PortMode};
use crate::ids::{DeviceId, PortId, SessionId, SiteId, TenantId};
use crate::inventory::{
    ClockRole, DeviceKind, DeviceRole, Inventory, LinkKind, Owner, PortMedium, PortSpec, SiteKind,
};
use crate::ipam::InterfaceKind;
use crate::topology::{AnalogMode, SessionKind, SessionOptions};

pub struct Facility {
    pub engine: Engine,
    pub t1: TenantId,
    pub t2: TenantId,
    pub t3: TenantId,
    // Tenant 1 end-to-end chain.
    pub ue_sim: DeviceId,
    pub ru0: DeviceId,
    pub du1: DeviceId,
    pub cu1: DeviceId,
    pub core_sim: DeviceId,
    // Tenant 2 DU conformance.
    pub du2: DeviceId,
    pub ru_ue_emu: DeviceId,
    pub core_emu2: DeviceId,
    // Tenant 3 RU conformance (radiated).
    pub ru1: DeviceId,
    pub du_emu: DeviceId,
    pub vst: DeviceId,
}

pub fn run(engine: &mut Engine, cmd: Command) -> Output {
    engine.execute(cmd).expect("facility command")
}

fn eth_ports(n: u32) -> Vec<PortSpec> {
    (0..n).map(|i| PortSpec::eth(format!("eth{i}"), 25)).collect()
}

/// Build the example facility on top of the given engine (usually
/// [`Engine::in_memory`], or a persistent one for durability testing).
pub fn build_facility(mut engine: Engine) -> Facility {
    let e = &mut engine;
    run(e, Command::InitPlan {
        base: "10.77.0.0/16".parse().unwrap(),
    });
    let site = |e: &mut Engine, name: &str, kind| -> SiteId {
        match run(e, Command::RegisterSite {
            name: name.into(),
            kind,
        }) {
            Output::Site(id) => id,
            other => panic!("unexpected output {other:?}"),
        }
    };
    let dc = site(e, "DataCenter-A", SiteKind::DataCenter);
    let lab = site(e, "Chamber-Lab", SiteKind::AnechoicChamber);
    let switch = |e: &mut Engine, site, model: &str| {
        match run(e, Command::RegisterSwitch {
            site,
            model: model.into(),
            ports: (0..16).map(|i| PortSpec::eth(format!("p{i}"), 100)).collect(),
            clock_role: ClockRole::TBc,
        }) {
            Output::Switch(id) => id,
            other => panic!("unexpected output {other:?}"),
        }
    };
    let sw1 = switch(e, dc, "S5232F-ON");
    let sw2 = switch(e, lab, "S5248F-ON");

    let tenant = |e: &mut Engine, name: &str| -> TenantId {
        match run(e, Command::CreateTenant { name: name.into() }) {
            Output::Tenant(doc) => doc.id,
            other => panic!("unexpected output {other:?}"),
        }
    };
    let t1 = tenant(e, "acme");
    let t2 = tenant(e, "bravo");
    let t3 = tenant(e, "carol");

    let device = |e: &mut Engine,
                  site: SiteId,
                  owner: Owner,
                  role: DeviceRole,
                  kind: DeviceKind,
                  eth: u32,
                  rf: &[PortMedium]|
     -> DeviceId {
        let mut ports = eth_ports(eth);
        for (i, medium) in rf.iter().enumerate() {
            ports.push(PortSpec::new(format!("rf{i}"), *medium, 0));
        }
        match run(e, Command::RegisterDevice {
            site,
            owner,
            role,
            kind,
            ports,
            features: Default::default(),
        }) {
            Output::Device(id) => id,
            other => panic!("unexpected output {other:?}"),
        }
    };

    let ue_sim = device(e, lab, Owner::Otic, DeviceRole::Te, DeviceKind::UeEmulator, 0, &[PortMedium::RfCoaxial]);
    let ru0 = device(e, lab, Owner::Tenant(t1), DeviceRole::Dut, DeviceKind::Ru, 1, &[PortMedium::RfCoaxial]);
    let du1 = device(e, dc, Owner::Tenant(t1), DeviceRole::Dut, DeviceKind::Du, 2, &[]);
    let cu1 = device(e, dc, Owner::Tenant(t1), DeviceRole::Dut, DeviceKind::Cu, 2, &[]);
    let core_sim = device(e, dc, Owner::Otic, DeviceRole::Te, DeviceKind::CoreEmulator, 1, &[]);
    let du2 = device(e, dc, Owner::Tenant(t2), DeviceRole::Dut, DeviceKind::Du, 2, &[]);
    let ru_ue_emu = device(e, dc, Owner::Otic, DeviceRole::Te, DeviceKind::RuUeEmulator, 2, &[]);
    let core_emu2 = device(e, dc, Owner::Otic, DeviceRole::Te, DeviceKind::CoreEmulator, 1, &[]);
    let ru1 = device(e, lab, Owner::Tenant(t3), DeviceRole::Dut, DeviceKind::Ru, 1, &[PortMedium::RfAntenna]);
    let du_emu = device(e, dc, Owner::Otic, DeviceRole::Te, DeviceKind::DuEmulator, 2, &[]);
    let vst = device(e, lab, Owner::Otic, DeviceRole::Te, DeviceKind::Vst, 0, &[PortMedium::RfAntenna]);

    // Cable every device ethernet port to a switch port: data-center gear
    // on sw1, lab gear on sw2.
    let mut sw1_next = 0usize;
    let mut sw2_next = 0usize;
    let mut wire = |e: &mut Engine, dev: DeviceId, on_sw1: bool| {
        let dev_eth: Vec<PortId> = e
            .state()
            .inventory
            .device(dev)
            .expect("device")
            .ports
            .iter()
            .filter(|p| p.medium == PortMedium::Ethernet)
            .map(|p| p.id)
            .collect();
        for p in dev_eth {
            let (sw, idx) = if on_sw1 {
                sw1_next += 1;
                (sw1, sw1_next - 1)
            } else {
                sw2_next += 1;
                (sw2, sw2_next - 1)
            };
            let sp = e.state().inventory.switch(sw).expect("switch").ports[idx].id;
            run(e, Command::AddLink {
                a: p,
                b: sp,
                kind: LinkKind::Access,
            });
        }
    };
    for dev in [du1, cu1, core_sim, du2, ru_ue_emu, core_emu2, du_emu] {
        wire(e, dev, true);
    }
    for dev in [ru0, ru1] {
        wire(e, dev, false);
    }
    // Inter-site trunk on the last port of each switch.
    let t_a = e.state().inventory.switch(sw1).expect("switch").ports[15].id;
    let t_b = e.state().inventory.switch(sw2).expect("switch").ports[15].id;
    run(e, Command::AddLink {
        a: t_a,
        b: t_b,
        kind: LinkKind::Trunk,
    });
    // Analog paths: conducted UE-to-RU0, radiated RU1-to-VST.
    let rf_of = |e: &Engine, dev: DeviceId| {
        e.state()
            .inventory
            .device(dev)
            .expect("device")
            .ports
            .iter()
            .find(|p| p.medium != PortMedium::Ethernet)
            .expect("rf port")
            .id
    };
    let (ue_rf, ru0_rf) = (rf_of(e, ue_sim), rf_of(e, ru0));
    run(e, Command::AddLink {
        a: ue_rf,
        b: ru0_rf,
        kind: LinkKind::Analog,
    });
    let (ru1_rf, vst_rf) = (rf_of(e, ru1), rf_of(e, vst));
    run(e, Command::AddLink {
        a: ru1_rf,
        b: vst_rf,
        kind: LinkKind::Analog,
    });

    Facility {
        engine,
        t1,
        t2,
        t3,
        ue_sim,
        ru0,
        du1,
        cu1,
        core_sim,
        du2,
        ru_ue_emu,
        core_emu2,
        ru1,
        du_emu,
        vst,
    }
}

pub fn fig3_facility() -> Facility {
    build_facility(Engine::in_memory())
}

impl Facility {
    /// Draft the three parallel sessions of the example scenario.
    pub fn plan_fig3_sessions(&mut self) -> (SessionId, SessionId, SessionId) {
        let e2e = self.plan_session(
            SessionKind::E2e,
            [self.t1],
            vec![self.ue_sim, self.ru0, self.du1, self.cu1, self.core_sim],
            SessionOptions::default(),
        );
        let du_conf = self.plan_session(
            SessionKind::DuConformance,
            [self.t2],
            vec![self.du2, self.ru_ue_emu, self.core_emu2],
            SessionOptions::default(),
        );
        let mut radiated = SessionOptions::default();
        radiated.analog_mode = AnalogMode::Radiated;
        let ru_conf = self.plan_session(
            SessionKind::RuConformance,
            [self.t3],
            vec![self.ru1, self.du_emu, self.vst],
            radiated,
        );
        (e2e, du_conf, ru_conf)
    }

    pub fn plan_session(
        &mut self,
        kind: SessionKind,
        tenants: impl IntoIterator<Item = TenantId>,
        participants: Vec<DeviceId>,
        options: SessionOptions,
    ) -> SessionId {
        match run(&mut self.engine, Command::PlanSession {
            kind,
            tenants: tenants.into_iter().collect::<BTreeSet<_>>(),
            participants,
            options,
        }) {
            Output::Session(doc) => doc.session.id,
            other => panic!("unexpected output {other:?}"),
        }
    }

    pub fn provision(&mut self, session: SessionId) {
        run(&mut self.engine, Command::ProvisionSession { session });
    }

    pub fn verify(&mut self, session: SessionId) {
        run(&mut self.engine, Command::VerifySession { session });
    }

    pub fn teardown(&mut self, session: SessionId) {
        run(&mut self.engine, Command::TeardownSession { session });
    }

    pub fn device_ports(&self, dev: DeviceId) -> Vec<PortId> {
        self.engine
            .state()
            .inventory
            .device(dev)
            .expect("device")
            .ports
            .iter()
            .map(|p| p.id)
            .collect()
    }

    pub fn session_vids(&self, session: SessionId) -> BTreeSet<u16> {
        self.engine.state().sessions[&session]
            .allocations
            .as_ref()
            .expect("allocated")
            .vids
            .values()
            .copied()
            .collect()
    }

    pub fn session_subnets(&self, session: SessionId) -> BTreeSet<ipnet::Ipv4Net> {
        self.engine.state().sessions[&session]
            .allocations
            .as_ref()
            .expect("allocated")
            .subnets
            .values()
            .copied()
            .collect()
    }

    pub fn vid_of(&self, session: SessionId, interface: InterfaceKind) -> u16 {
        self.engine.state().sessions[&session]
            .allocations
            .as_ref()
            .expect("allocated")
            .vids[&interface]
    }
}

// ---------------------------------------------------------------------------
// Random small fabrics for reachability testing

/// SplitMix64; deterministic and dependency-free.
pub struct DemoRng(pub u64);

impl DemoRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw from `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n.max(1)
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }
}

pub struct RandomFabric {
    pub inventory: Inventory,
    pub configs: Vec<PortConfig>,
    pub active_vids: BTreeSet<u16>,
    pub device_ports: Vec<PortId>,
}

/// A random small fabric: up to 5 switches, up to 20 single-port devices,
/// up to 30 VIDs, random trunking and random port modes (including
/// unconfigured and shut-down ports).
pub fn random_fabric(seed: u64) -> RandomFabric {
    let mut rng = DemoRng(seed);
    let mut inv = Inventory::new();
    let site = inv.register_site("site", SiteKind::DataCenter).expect("site");
    let n_switches = 1 + rng.below(5) as usize;
    let n_devices = 2 + rng.below(19) as usize;
    let n_vids = 1 + rng.below(30) as u16;
    let vids: Vec<u16> = (2..2 + n_vids).collect();

    let switches: Vec<_> = (0..n_switches)
        .map(|_| {
            let ports: Vec<PortSpec> = (0..24)
                .map(|i| PortSpec::eth(format!("p{i}"), 100))
                .collect();
            inv.register_switch(site, "sw", &ports, ClockRole::None)
                .expect("switch")
        })
        .collect();
    let mut free_ports: Vec<Vec<PortId>> = switches
        .iter()
        .map(|sw| inv.switch(*sw).expect("switch").ports.iter().map(|p| p.id).collect())
        .collect();

    for a in 0..n_switches {
        for b in a + 1..n_switches {
            if rng.chance(3, 5) {
                let pa = free_ports[a].pop().expect("port");
                let pb = free_ports[b].pop().expect("port");
                inv.add_link(pa, pb, LinkKind::Trunk).expect("trunk");
            }
        }
    }

    let mut device_ports = Vec::new();
    for d in 0..n_devices {
        let dev = inv
            .register_device(
                site,
                Owner::Tenant(TenantId(d as u32 % 4 + 1)),
                DeviceRole::Dut,
                DeviceKind::Du,
                &[PortSpec::eth("eth0", 25)],
                Default::default(),
            )
            .expect("device");
        let port = inv.device(dev).expect("device").ports[0].id;
        device_ports.push(port);
        if rng.chance(9, 10) {
            let sw = rng.below(n_switches as u64) as usize;
            if let Some(sp) = free_ports[sw].pop() {
                inv.add_link(port, sp, LinkKind::Access).expect("access");
            }
        }
    }

    let mut configs: Vec<PortConfig> = Vec::new();
    let all_ports: Vec<PortId> = inv
        .switches()
        .flat_map(|s| s.ports.iter().map(|p| p.id))
        .chain(device_ports.iter().copied())
        .collect();
    for port in all_ports {
        let roll = rng.below(10);
        if roll < 3 {
            continue;
        }
        let mode = if roll < 4 {
            PortMode::Shutdown
        } else if roll < 8 {
            PortMode::Access(vids[rng.below(vids.len() as u64) as usize])
        } else {
            let count = 1 + rng.below(6.min(vids.len() as u64)) as usize;
            PortMode::Trunk(
                (0..count)
                    .map(|_| vids[rng.below(vids.len() as u64) as usize])
                    .collect(),
            )
        };
        configs.push(PortConfig {
            port,
            mode,
            oob: false,
        });
    }

    RandomFabric {
        inventory: inv,
        configs,
        active_vids: vids.into_iter().collect(),
        device_ports,
    }
}
