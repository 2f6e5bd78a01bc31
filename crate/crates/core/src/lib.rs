//! Programmable orchestration engine for a multi-tenant Open RAN test
//! facility.
//!
//! The crate models the facility bottom-up: a physical [`inventory`] of
//! sites, switches, devices and cabling; an [`ipam`] blueprint that carves a
//! /16 into facility, tenant and 5G data networks; a [`vlan`] pool mapping
//! test demands onto 802.1Q ids; a [`topology`] compiler that turns test
//! intents into required adjacencies; a pure [`fabric`] simulator that
//! checks L2/L3 reachability, intent satisfaction and tenant isolation; and
//! the transactional [`engine`] that ties session lifecycles together with
//! journalled persistence ([`journal`]) and switch-config export
//! ([`switchcfg`]).

pub mod demo;
pub mod engine;
pub mod fabric;
pub mod features;
pub mod ids;
pub mod inventory;
pub mod ipam;
pub mod journal;
pub mod session;
pub mod switchcfg;
pub mod topology;
pub mod vlan;

pub use engine::{Command, Engine, EngineError, EngineState, ErrorClass, Output};
pub use ids::{DeviceId, LinkId, PortId, SessionId, SiteId, SwitchId, TenantId};
