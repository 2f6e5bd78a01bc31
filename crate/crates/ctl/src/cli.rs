//! `oticctl`: command-line surface over the engine.
//!
//! Exit codes: 0 success (or verification pass), 1 usage or state errors,
//! 2 intent failure, 3 isolation violation, 4 resource exhaustion.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use ipnet::Ipv4Net;

use otic_core::engine::{Command as EngineCommand, Engine, EngineError, ErrorClass, Output};
use otic_core::fabric::VerificationReport;
use otic_core::features::FeatureSet;
use otic_core::ids::{DeviceId, PortId, SessionId, SiteId, TenantId};
use otic_core::inventory::{
    ClockRole, DeviceKind, DeviceRole, LinkKind, Owner, PortMedium, PortSpec, SiteKind,
};
use otic_core::ipam::InterfaceKind;
use otic_core::journal::{replay_journal, JOURNAL_FILE};
use otic_core::switchcfg::export_switch_configs;
use otic_core::topology::{
    AnalogMode, PlaneStep, SessionKind, SessionOptions, SplaneSource,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INTENT_FAILURE: u8 = 2;
pub const EXIT_ISOLATION_VIOLATION: u8 = 3;
pub const EXIT_EXHAUSTED: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "oticctl", version, about = "Orchestrate a multi-tenant Open RAN test facility")]
pub struct Cli {
    /// Directory holding the journal, snapshots and token map.
    #[arg(long, global = true, default_value = "otic-state")]
    pub state_dir: PathBuf,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: TopCommand,
}

#[derive(Debug, Subcommand)]
pub enum TopCommand {
    /// Address-plan management.
    #[command(subcommand)]
    Plan(PlanCmd),
    /// Site registration.
    #[command(subcommand)]
    Site(SiteCmd),
    /// Switch registration.
    #[command(subcommand)]
    Switch(SwitchCmd),
    /// Tenant lifecycle.
    #[command(subcommand)]
    Tenant(TenantCmd),
    /// Device registration and cabling.
    #[command(subcommand)]
    Device(DeviceCmd),
    /// Test-session lifecycle.
    #[command(subcommand)]
    Session(SessionCmd),
    /// Fabric verification and switch-config export.
    #[command(subcommand)]
    Fabric(FabricCmd),
    /// Persistence operations.
    #[command(subcommand)]
    State(StateCmd),
    /// Inventory import/export.
    #[command(subcommand)]
    Inventory(InventoryCmd),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum PlanCmd {
    /// Lay out the facility /16.
    Init { base: Ipv4Net },
    /// Print the current plan document.
    Show,
}

#[derive(Debug, Subcommand)]
pub enum SiteCmd {
    Create {
        name: String,
        #[arg(long, value_parser = parse_site_kind)]
        kind: SiteKind,
    },
}

#[derive(Debug, Subcommand)]
pub enum SwitchCmd {
    Register {
        #[arg(long)]
        site: SiteId,
        #[arg(long)]
        model: String,
        /// Shorthand: number of ethernet ports to create (p0..pN-1).
        #[arg(long, default_value_t = 0)]
        ports: u32,
        /// Capacity for shorthand ports, Gbit/s.
        #[arg(long, default_value_t = 100)]
        gbps: u32,
        /// Explicit ports, repeatable: name[:medium[:gbps]].
        #[arg(long = "port", value_parser = parse_port_spec)]
        port: Vec<PortSpec>,
        #[arg(long, default_value = "none", value_parser = parse_clock_role)]
        clock_role: ClockRole,
    },
}

#[derive(Debug, Subcommand)]
pub enum TenantCmd {
    Create { name: String },
    Delete { tenant: String },
    Show { tenant: String },
}

#[derive(Debug, Subcommand)]
pub enum DeviceCmd {
    Register {
        #[arg(long)]
        site: SiteId,
        /// `otic` or a tenant id/name.
        #[arg(long)]
        owner: String,
        #[arg(long, value_parser = parse_role)]
        role: DeviceRole,
        #[arg(long, value_parser = parse_device_kind)]
        kind: DeviceKind,
        /// Repeatable: name[:medium[:gbps]].
        #[arg(long = "port", value_parser = parse_port_spec)]
        port: Vec<PortSpec>,
        /// Repeatable: key=value1,value2.
        #[arg(long = "feature", value_parser = parse_feature)]
        feature: Vec<(String, Vec<String>)>,
    },
    /// Cable two ports: refs are `p12` or `owner:name` (e.g. d3:eth0).
    Link {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value = "access")]
        kind: LinkKind,
    },
}

#[derive(Debug, Args)]
pub struct SessionPlanArgs {
    #[arg(long, value_parser = parse_session_kind)]
    pub kind: SessionKind,
    /// Comma-separated tenant ids or names.
    #[arg(long, value_delimiter = ',')]
    pub tenants: Vec<String>,
    /// Comma-separated device ids.
    #[arg(long, value_delimiter = ',')]
    pub participants: Vec<DeviceId>,
    #[arg(long, value_parser = parse_analog_mode)]
    pub analog: Option<AnalogMode>,
    /// Interfaces to impair, comma-separated (e.g. F1,NG).
    #[arg(long, value_delimiter = ',')]
    pub impair: Vec<InterfaceKind>,
    #[arg(long)]
    pub impair_delay_us: Option<u32>,
    /// Extra WG5 interfaces (E1,X2,Xn).
    #[arg(long, value_delimiter = ',')]
    pub wg5: Vec<InterfaceKind>,
    /// S-plane source: `external` or a device id.
    #[arg(long)]
    pub splane: Option<String>,
    /// Device acting as the O1 management attachment point.
    #[arg(long)]
    pub o1_manager: Option<DeviceId>,
    /// Plugfest mode: grant shared /26 access to the session's tenants.
    #[arg(long)]
    pub shared: bool,
}

#[derive(Debug, Subcommand)]
pub enum SessionCmd {
    Plan(SessionPlanArgs),
    Provision { session: SessionId },
    Verify { session: SessionId },
    Teardown { session: SessionId },
    Show { session: SessionId },
    /// Record a plane-test result: m_plane, s_plane, cu_plane, performance.
    Advance {
        session: SessionId,
        plane: String,
        result: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum FabricCmd {
    /// Verify every live session's intent plus global isolation.
    Check,
    /// Export per-switch configuration documents.
    Export {
        /// Write one JSON file per switch into this directory instead of
        /// printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum StateCmd {
    /// Write a full snapshot now.
    Snapshot,
    /// Replay the journal from the empty state and compare hashes.
    Replay,
}

#[derive(Debug, Subcommand)]
pub enum InventoryCmd {
    Export,
    Import { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

// ---------------------------------------------------------------------------
// Value parsers

fn parse_site_kind(s: &str) -> Result<SiteKind, String> {
    match s {
        "data_center" => Ok(SiteKind::DataCenter),
        "lab" => Ok(SiteKind::Lab),
        "anechoic_chamber" => Ok(SiteKind::AnechoicChamber),
        "outdoor" => Ok(SiteKind::Outdoor),
        other => Err(format!("unknown site kind `{other}`")),
    }
}

fn parse_clock_role(s: &str) -> Result<ClockRole, String> {
    match s {
        "none" => Ok(ClockRole::None),
        "t_bc" | "t-bc" => Ok(ClockRole::TBc),
        "t_gm" | "t-gm" => Ok(ClockRole::TGm),
        other => Err(format!("unknown clock role `{other}`")),
    }
}

fn parse_role(s: &str) -> Result<DeviceRole, String> {
    match s {
        "dut" => Ok(DeviceRole::Dut),
        "te" => Ok(DeviceRole::Te),
        "service" => Ok(DeviceRole::Service),
        other => Err(format!("unknown role `{other}`")),
    }
}

fn parse_device_kind(s: &str) -> Result<DeviceKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown device kind `{s}`"))
}

fn parse_session_kind(s: &str) -> Result<SessionKind, String> {
    s.parse()
}

fn parse_analog_mode(s: &str) -> Result<AnalogMode, String> {
    match s {
        "radiated" => Ok(AnalogMode::Radiated),
        "conducted" => Ok(AnalogMode::Conducted),
        other => Err(format!("unknown analog mode `{other}`")),
    }
}

/// `name[:medium[:gbps]]`, medium defaulting to ethernet.
fn parse_port_spec(s: &str) -> Result<PortSpec, String> {
    let mut parts = s.split(':');
    let name = parts.next().filter(|n| !n.is_empty()).ok_or("empty port name")?;
    let medium = match parts.next() {
        None => PortMedium::Ethernet,
        Some(m) => m.parse()?,
    };
    let capacity = match parts.next() {
        None => {
            if medium == PortMedium::Ethernet {
                25
            } else {
                0
            }
        }
        Some(c) => c.parse::<u32>().map_err(|e| e.to_string())?,
    };
    if parts.next().is_some() {
        return Err(format!("malformed port spec `{s}`"));
    }
    Ok(PortSpec::new(name, medium, capacity))
}

fn parse_feature(s: &str) -> Result<(String, Vec<String>), String> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| format!("feature `{s}` must be key=v1,v2"))?;
    Ok((
        key.to_string(),
        values.split(',').map(str::to_string).collect(),
    ))
}

// ---------------------------------------------------------------------------
// Dispatch

pub struct CliOutcome {
    pub exit_code: u8,
}

pub fn run(cli: Cli) -> anyhow::Result<CliOutcome> {
    let json = cli.json;
    match cli.command {
        TopCommand::Serve(args) => {
            crate::serve(&cli.state_dir, &args.addr)?;
            Ok(CliOutcome { exit_code: EXIT_OK })
        }
        command => {
            let mut engine = Engine::open(&cli.state_dir)
                .with_context(|| format!("opening state dir {}", cli.state_dir.display()))?;
            dispatch(&mut engine, command, json)
        }
    }
}

fn engine_exit_code(err: &EngineError) -> u8 {
    match err.class() {
        ErrorClass::Exhausted => EXIT_EXHAUSTED,
        _ => EXIT_USAGE,
    }
}

fn report_exit_code(report: &VerificationReport) -> u8 {
    if !report.isolation_passed() {
        EXIT_ISOLATION_VIOLATION
    } else if !report.intent_passed() {
        EXIT_INTENT_FAILURE
    } else {
        EXIT_OK
    }
}

fn execute(engine: &mut Engine, cmd: EngineCommand, json: bool) -> anyhow::Result<CliOutcome> {
    match engine.execute(cmd) {
        Ok(output) => {
            render_output(engine, &output, json);
            let exit_code = match &output {
                Output::Session(doc) => doc
                    .session
                    .report
                    .as_ref()
                    .map(report_exit_code)
                    .unwrap_or(EXIT_OK),
                _ => EXIT_OK,
            };
            Ok(CliOutcome { exit_code })
        }
        Err(err) => {
            eprintln!("error: {err}");
            Ok(CliOutcome {
                exit_code: engine_exit_code(&err),
            })
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn render_output(engine: &Engine, output: &Output, json: bool) {
    if json {
        print_json(output);
        return;
    }
    match output {
        Output::Site(id) => println!("registered site {id}"),
        Output::Switch(id) => println!("registered switch {id}"),
        Output::Device(id) => println!("registered device {id}"),
        Output::Link(id) => println!("added link {id}"),
        Output::Inventory(doc) => println!(
            "inventory: {} sites, {} switches, {} devices, {} links",
            doc.sites.len(),
            doc.switches.len(),
            doc.devices.len(),
            doc.links.len()
        ),
        Output::Plan(doc) => {
            println!("plan {} initialized", doc.base_prefix);
            for net in &doc.fixed_nets {
                println!("  {:<12} {} routable={}", net.name, net.subnet, yn(net.routable));
            }
            for d in &doc.data_net_allocations {
                println!(
                    "  {:<12} {} routable={}",
                    d.interface.to_string(),
                    d.subnet,
                    yn(d.routable)
                );
            }
        }
        Output::Tenant(doc) => {
            println!(
                "tenant {} `{}` block {} mgmt {} oob {} vpn {}",
                doc.id, doc.name, doc.block, doc.management, doc.oob, doc.vpn
            );
        }
        Output::Session(doc) => {
            let s = &doc.session;
            println!("session {} {:?} state {:?}", s.id, s.kind, s.state);
            if let Some(alloc) = &s.allocations {
                for (iface, vid) in &alloc.vids {
                    match alloc.subnets.get(iface) {
                        Some(net) => println!("  {iface}: vid {vid} subnet {net}"),
                        None => println!("  {iface}: vid {vid} (L2 only)"),
                    }
                }
            }
            if let Some(report) = &s.report {
                render_report(report);
            }
        }
        Output::Unit => println!("ok"),
    }
    let _ = engine;
}

fn yn(b: bool) -> &'static str {
    if b {
        "Y"
    } else {
        "N"
    }
}

fn render_report(report: &VerificationReport) {
    for check in &report.intent_results {
        match check {
            otic_core::fabric::EdgeCheck::Digital {
                a,
                b,
                interface,
                vid,
                passed,
            } => println!(
                "  edge {a} <-> {b} {interface} vid {vid}: {}",
                pass_str(*passed)
            ),
            otic_core::fabric::EdgeCheck::Analog { a, b, mode, passed } => {
                println!("  analog {a} <-> {b} {mode:?}: {}", pass_str(*passed))
            }
        }
    }
    for v in &report.isolation_violations {
        match v {
            otic_core::fabric::IsolationViolation::L2 {
                vid,
                tenant_a,
                endpoint_a,
                tenant_b,
                endpoint_b,
            } => println!(
                "  VIOLATION vid {vid}: {tenant_a}({endpoint_a}) <-> {tenant_b}({endpoint_b})"
            ),
            otic_core::fabric::IsolationViolation::L3 {
                tenant_a,
                subnet_a,
                tenant_b,
                subnet_b,
            } => println!("  VIOLATION L3: {tenant_a} {subnet_a} <-> {tenant_b} {subnet_b}"),
        }
    }
    println!(
        "  verdict: {}",
        if report.passed() { "PASS" } else { "FAIL" }
    );
}

fn pass_str(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

fn resolve_tenant(engine: &Engine, key: &str) -> anyhow::Result<TenantId> {
    if let Ok(id) = key.parse::<TenantId>() {
        if engine.state().tenants.contains_key(&id) {
            return Ok(id);
        }
    }
    engine
        .state()
        .tenant_by_name(key)
        .map(|t| t.id)
        .ok_or_else(|| anyhow!("unknown tenant `{key}`"))
}

fn resolve_port(engine: &Engine, key: &str) -> anyhow::Result<PortId> {
    if let Some((owner, name)) = key.split_once(':') {
        return engine
            .state()
            .inventory
            .port_by_name(owner, name)
            .map(|p| p.id)
            .ok_or_else(|| anyhow!("unknown port `{key}`"));
    }
    key.parse::<PortId>().map_err(|e| anyhow!(e))
}

fn dispatch(engine: &mut Engine, command: TopCommand, json: bool) -> anyhow::Result<CliOutcome> {
    match command {
        TopCommand::Serve(_) => unreachable!("handled in run"),
        TopCommand::Plan(PlanCmd::Init { base }) => {
            execute(engine, EngineCommand::InitPlan { base }, json)
        }
        TopCommand::Plan(PlanCmd::Show) => {
            let doc = engine.state().plan_doc()?;
            if json {
                print_json(&doc);
            } else {
                render_output(engine, &Output::Plan(doc), false);
            }
            Ok(CliOutcome { exit_code: EXIT_OK })
        }
        TopCommand::Site(SiteCmd::Create { name, kind }) => {
            execute(engine, EngineCommand::RegisterSite { name, kind }, json)
        }
        TopCommand::Switch(SwitchCmd::Register {
            site,
            model,
            ports,
            gbps,
            mut port,
            clock_role,
        }) => {
            let mut specs: Vec<PortSpec> = (0..ports)
                .map(|i| PortSpec::eth(format!("p{i}"), gbps))
                .collect();
            specs.append(&mut port);
            execute(
                engine,
                EngineCommand::RegisterSwitch {
                    site,
                    model,
                    ports: specs,
                    clock_role,
                },
                json,
            )
        }
        TopCommand::Tenant(TenantCmd::Create { name }) => {
            execute(engine, EngineCommand::CreateTenant { name }, json)
        }
        TopCommand::Tenant(TenantCmd::Delete { tenant }) => {
            let tenant = resolve_tenant(engine, &tenant)?;
            execute(engine, EngineCommand::DeleteTenant { tenant }, json)
        }
        TopCommand::Tenant(TenantCmd::Show { tenant }) => {
            let tenant = resolve_tenant(engine, &tenant)?;
            let doc = engine.state().tenant_doc(tenant)?;
            if json {
                print_json(&doc);
            } else {
                render_output(engine, &Output::Tenant(doc), false);
            }
            Ok(CliOutcome { exit_code: EXIT_OK })
        }
        TopCommand::Device(DeviceCmd::Register {
            site,
            owner,
            role,
            kind,
            port,
            feature,
        }) => {
            let owner = if owner == "otic" {
                Owner::Otic
            } else {
                Owner::Tenant(resolve_tenant(engine, &owner)?)
            };
            let features: FeatureSet = feature.into_iter().collect();
            for key in features.unknown_keys() {
                eprintln!("warning: feature key `{key}` is not in the catalog");
            }
            execute(
                engine,
                EngineCommand::RegisterDevice {
                    site,
                    owner,
                    role,
                    kind,
                    ports: port,
                    features,
                },
                json,
            )
        }
        TopCommand::Device(DeviceCmd::Link { a, b, kind }) => {
            let a = resolve_port(engine, &a)?;
            let b = resolve_port(engine, &b)?;
            execute(engine, EngineCommand::AddLink { a, b, kind }, json)
        }
        TopCommand::Session(SessionCmd::Plan(args)) => {
            let tenants: BTreeSet<TenantId> = args
                .tenants
                .iter()
                .map(|t| resolve_tenant(engine, t))
                .collect::<anyhow::Result<_>>()?;
            let mut options = SessionOptions::default();
            if let Some(mode) = args.analog {
                options.analog_mode = mode;
            }
            options.impair = args.impair.into_iter().collect();
            if let Some(delay) = args.impair_delay_us {
                options.impair_delay_us = delay;
            }
            options.wg5_interfaces = args.wg5.into_iter().collect();
            options.splane_source = match args.splane.as_deref() {
                None => None,
                Some("external") => Some(SplaneSource::External),
                Some(dev) => Some(SplaneSource::Device(dev.parse().map_err(|e| anyhow!("{e}"))?)),
            };
            options.o1_manager = args.o1_manager;
            options.shared = args.shared;
            execute(
                engine,
                EngineCommand::PlanSession {
                    kind: args.kind,
                    tenants,
                    participants: args.participants,
                    options,
                },
                json,
            )
        }
        TopCommand::Session(SessionCmd::Provision { session }) => {
            execute(engine, EngineCommand::ProvisionSession { session }, json)
        }
        TopCommand::Session(SessionCmd::Verify { session }) => {
            execute(engine, EngineCommand::VerifySession { session }, json)
        }
        TopCommand::Session(SessionCmd::Teardown { session }) => {
            execute(engine, EngineCommand::TeardownSession { session }, json)
        }
        TopCommand::Session(SessionCmd::Show { session }) => {
            let doc = engine.state().session_doc(session)?;
            if json {
                print_json(&doc);
            } else {
                render_output(engine, &Output::Session(Box::new(doc)), false);
            }
            Ok(CliOutcome { exit_code: EXIT_OK })
        }
        TopCommand::Session(SessionCmd::Advance {
            session,
            plane,
            result,
        }) => {
            let plane: PlaneStep = plane.parse().map_err(|e: String| anyhow!(e))?;
            let passed = match result.as_str() {
                "passed" | "pass" => true,
                "failed" | "fail" => false,
                other => bail!("result must be passed|failed, got `{other}`"),
            };
            execute(
                engine,
                EngineCommand::AdvancePlane {
                    session,
                    plane,
                    passed,
                },
                json,
            )
        }
        TopCommand::Fabric(FabricCmd::Check) => {
            let report = engine.state().verify_all()?;
            if json {
                print_json(&report);
            } else {
                render_report(&report);
            }
            Ok(CliOutcome {
                exit_code: report_exit_code(&report),
            })
        }
        TopCommand::Fabric(FabricCmd::Export { out }) => {
            let docs = export_switch_configs(engine.state());
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    for doc in &docs {
                        let path = dir.join(format!("{}.json", doc.switch_id));
                        std::fs::write(&path, serde_json::to_string_pretty(doc)?)?;
                        if !json {
                            println!("wrote {}", path.display());
                        }
                    }
                    if json {
                        print_json(&docs);
                    }
                }
                None => print_json(&docs),
            }
            Ok(CliOutcome { exit_code: EXIT_OK })
        }
        TopCommand::State(StateCmd::Snapshot) => {
            engine.snapshot_now()?;
            if json {
                print_json(&serde_json::json!({ "state_hash": engine.state_hash() }));
            } else {
                println!("snapshot written, state hash {}", engine.state_hash());
            }
            Ok(CliOutcome { exit_code: EXIT_OK })
        }
        TopCommand::State(StateCmd::Replay) => {
            let dir = engine
                .state_dir()
                .ok_or_else(|| anyhow!("engine has no state dir"))?;
            let path = dir.join(JOURNAL_FILE);
            let text = if path.exists() {
                std::fs::read_to_string(&path)?
            } else {
                String::new()
            };
            let outcome = replay_journal(&text)?;
            let live = engine.state_hash();
            let matches = outcome.final_hash == live;
            if json {
                print_json(&serde_json::json!({
                    "entries": outcome.last_seq,
                    "replayed_hash": outcome.final_hash,
                    "live_hash": live,
                    "match": matches,
                }));
            } else {
                println!(
                    "replayed {} entries, hash {} ({})",
                    outcome.last_seq,
                    outcome.final_hash,
                    if matches { "matches live state" } else { "MISMATCH" }
                );
            }
            Ok(CliOutcome {
                exit_code: if matches { EXIT_OK } else { EXIT_USAGE },
            })
        }
        TopCommand::Inventory(InventoryCmd::Export) => {
            print_json(&engine.state().inventory.export());
            Ok(CliOutcome { exit_code: EXIT_OK })
        }
        TopCommand::Inventory(InventoryCmd::Import { file }) => {
            let raw = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let doc = serde_json::from_str(&raw).context("parsing inventory document")?;
            execute(engine, EngineCommand::ImportInventory { doc }, json)
        }
    }
}
