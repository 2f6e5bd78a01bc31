//! Shared facility fixture, re-exported from the library's demo module so
//! the integration suites and the acceptance target use one builder.

#![allow(unused_imports, dead_code)]

pub use otic_core::demo::{build_facility, fig3_facility, run, Facility};

use otic_core::engine::Engine;
use otic_core::ids::{DeviceId, PortId};

pub trait EngineExt {
    fn engine_device_ports(&self, dev: DeviceId) -> Vec<PortId>;
}

impl EngineExt for Engine {
    fn engine_device_ports(&self, dev: DeviceId) -> Vec<PortId> {
        self.state()
            .inventory
            .device(dev)
            .expect("device")
            .ports
            .iter()
            .map(|p| p.id)
            .collect()
    }
}
