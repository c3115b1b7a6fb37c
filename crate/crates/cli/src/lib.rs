//! `btc`: enrol templates, run scripted simulations and attack suites, and
//! report on the card antenna.
//!
//! Every command returns its output as strings so the whole CLI can be driven
//! in-process. Exit codes: 0 success, 1 attack verdict mismatch, 2 bad input.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use biothentic_core::antenna::{analyze, AntennaGeometry, CARRIER_FREQUENCY_HZ, DEFAULT_REFERENCE_IMPEDANCE};
use biothentic_core::fingerprint::{synthetic_store, Label, MinutiaPoint, Role, TemplateStore};
use biothentic_core::harness::{parse_suite, run_suite};
use biothentic_core::sim::{parse_script, run_script, Environment, SimulationConfig};
use biothentic_core::trace::render;
use clap::{Parser, Subcommand};
use serde::Serialize;

pub const EXIT_OK: u8 = 0;
pub const EXIT_MISMATCH: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "btc", version, about = "Fingerprint-gated RFID card simulator")]
pub struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Append a template to a store file (created if missing).
    Enroll {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        label: String,
        /// authorized_with_permission, authorized_without_permission,
        /// unauthorized or unauthorized_flagged.
        #[arg(long)]
        role: String,
        /// JSON array of minutiae.
        #[arg(long)]
        points: PathBuf,
    },
    /// Write the seeded five-template synthetic store (A-E).
    Synthesize {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Run a step script and print the event trace.
    Simulate {
        script: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config store path.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Run an attack suite and print outcomes and the countermeasure matrix.
    Attack {
        suite: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Inductance, tuning and reflection report for a spiral geometry.
    Antenna { geometry: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Self { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn input_error(msg: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INPUT, stdout: String::new(), stderr: format!("error: {msg}\n") }
    }
}

type CmdResult = Result<Output, String>;

pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Output { code: EXIT_INPUT, stdout: String::new(), stderr: text }
            } else {
                Output::ok(text)
            };
        }
    };
    execute(&cli).unwrap_or_else(Output::input_error)
}

pub fn execute(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Enroll { store, label, role, points } => enroll(store, label, role, points, cli.json),
        Command::Synthesize { store, seed } => synthesize(store, *seed, cli.json),
        Command::Simulate { script, config, seed, store } => {
            let env = environment(config.as_deref(), *seed, store.as_deref())?;
            simulate(&env, script, cli.json)
        }
        Command::Attack { suite, config, seed, store } => {
            let env = environment(config.as_deref(), *seed, store.as_deref())?;
            attack(&env, suite, cli.json)
        }
        Command::Antenna { geometry } => antenna(geometry, cli.json),
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn load_store(path: &Path) -> Result<TemplateStore, String> {
    let store: TemplateStore = parse_json(path)?;
    store.validate().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(store)
}

/// Resolves config, seed and store. Precedence: flag, then config file. With
/// no store anywhere the seeded synthetic store is used.
pub fn environment(config: Option<&Path>, seed: Option<u64>, store: Option<&Path>) -> Result<Environment, String> {
    let (mut cfg, base) = match config {
        Some(path) => {
            let cfg: SimulationConfig = parse_json(path)?;
            (cfg, path.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => {
            let seed = seed.ok_or("a seed is required: pass --seed or --config with a seed field")?;
            let cfg: SimulationConfig =
                serde_json::from_value(serde_json::json!({ "seed": seed })).expect("minimal config");
            (cfg, PathBuf::new())
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let store_path = match store {
        Some(p) => Some(p.to_path_buf()),
        None => cfg.store.as_ref().map(|p| base.join(p)),
    };
    let templates = match &store_path {
        Some(p) => load_store(p)?,
        None => synthetic_store(cfg.seed),
    };
    Environment::new(cfg, templates).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct EnrollReport {
    store: String,
    label: Label,
    role: Role,
    points: usize,
    templates: usize,
}

pub fn enroll(store_path: &Path, label: &str, role: &str, points: &Path, json: bool) -> CmdResult {
    let label: Label = label.parse().map_err(|e| format!("{e}"))?;
    let role: Role = role.parse().map_err(|e| format!("{e}"))?;
    let minutiae: Vec<MinutiaPoint> = parse_json(points)?;
    let mut store = if store_path.exists() { load_store(store_path)? } else { TemplateStore::new() };
    let n = store.enroll(minutiae, label, role).map_err(|e| e.to_string())?.points.len();
    fs::write(store_path, to_json(&store)).map_err(|e| format!("{}: {e}", store_path.display()))?;
    let report = EnrollReport {
        store: store_path.display().to_string(),
        label,
        role,
        points: n,
        templates: store.len(),
    };
    Ok(Output::ok(if json {
        to_json(&report)
    } else {
        format!(
            "enrolled {label} as {} ({n} minutiae); {} now holds {} templates\n",
            role.as_str(),
            report.store,
            report.templates
        )
    }))
}

pub fn synthesize(store_path: &Path, seed: u64, json: bool) -> CmdResult {
    let store = synthetic_store(seed);
    fs::write(store_path, to_json(&store)).map_err(|e| format!("{}: {e}", store_path.display()))?;
    Ok(Output::ok(if json {
        to_json(&store)
    } else {
        let mut s = String::new();
        for t in store.iter() {
            let _ = writeln!(s, "{} {} ({} minutiae)", t.label, t.role.as_str(), t.points.len());
        }
        let _ = writeln!(s, "wrote {}", store_path.display());
        s
    }))
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    seed: u64,
    events: &'a [biothentic_core::trace::AccessEvent],
}

pub fn simulate(env: &Environment, script: &Path, json: bool) -> CmdResult {
    let steps = parse_script(&read(script)?).map_err(|e| format!("{}: {e}", script.display()))?;
    let trace = run_script(env, &steps).map_err(|e| e.to_string())?;
    Ok(Output::ok(if json {
        to_json(&SimulationReport { seed: env.seed, events: &trace })
    } else {
        render(&trace)
    }))
}

pub fn attack(env: &Environment, suite: &Path, json: bool) -> CmdResult {
    let entries = parse_suite(&read(suite)?).map_err(|e| format!("{}: {e}", suite.display()))?;
    let report = run_suite(&entries, env, env.seed).map_err(|e| e.to_string())?;
    let stdout = if json { to_json(&report) } else { report.render_text() };
    let mismatched: Vec<&str> = report
        .outcomes
        .iter()
        .filter(|o| !o.matches_expectation())
        .map(|o| o.name.as_str())
        .collect();
    if mismatched.is_empty() {
        Ok(Output::ok(stdout))
    } else {
        Ok(Output {
            code: EXIT_MISMATCH,
            stdout,
            stderr: format!("verdict mismatch: {}\n", mismatched.join(", ")),
        })
    }
}

pub fn antenna(geometry: &Path, json: bool) -> CmdResult {
    let g: AntennaGeometry = parse_json(geometry)?;
    let r = analyze(&g, CARRIER_FREQUENCY_HZ, DEFAULT_REFERENCE_IMPEDANCE).map_err(|e| e.to_string())?;
    if json {
        return Ok(Output::ok(to_json(&r)));
    }
    let mut s = String::new();
    let _ = writeln!(s, "geometry: {} x {} mm, {} turns, w={} mm, s={} mm", g.outer_length, g.outer_width, g.turns, g.trace_width, g.spacing);
    let _ = writeln!(s, "trace length: {:.3} mm", r.trace_length);
    let _ = writeln!(s, "inductance (greenhouse): {:.6} uH", r.inductance * 1e6);
    let _ = writeln!(s, "inductance (wheeler): {:.6} uH", r.inductance_wheeler * 1e6);
    let _ = writeln!(s, "relative gap: {:.2} %", r.inductance_relative_gap * 100.0);
    let _ = writeln!(s, "tuning capacitance @ {:.2} MHz: {:.3} pF", CARRIER_FREQUENCY_HZ / 1e6, r.tuning_capacitance * 1e12);
    let _ = writeln!(s, "resonant frequency: {:.6} MHz", r.resonant_frequency / 1e6);
    let _ = writeln!(s, "trace resistance (dc): {:.4} ohm", r.trace_resistance);
    let _ = writeln!(s, "reflection estimate (lumped, {DEFAULT_REFERENCE_IMPEDANCE} ohm): {:.3} dB", r.reflection_coefficient_db);
    let _ = writeln!(s, "reference (full-wave): {} dB", r.reference_s11_db);
    Ok(Output::ok(s))
}
