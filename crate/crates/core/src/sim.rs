//! Simulation configuration, the single-card world, and scripted runs.
//!
//! Script lines (one step each, `#` starts a comment):
//!
//! ```text
//! scan <label> live|film
//! wait <ms>
//! interrogate <distance_mm> <angle_deg>
//! tamper cable_bridge|voltage_injection_5v [breached]
//! reset
//! ```

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConstants, LinkConditions};
use crate::derive_seed;
use crate::error::{validation, Result};
use crate::fingerprint::{capture, CaptureSettings, Label, TemplateStore};
use crate::firmware::{check_store, Card, CardConfig, TamperKind};
use crate::reader::{access_decision, decision_event, AccessControlList, Decision, Hop, Interrogation, Reader, Transponder};
use crate::trace::{AccessEvent, EventKind};

/// On-disk configuration document. `store` is a path resolved by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    #[serde(default)]
    pub card: CardConfig,
    #[serde(default)]
    pub channel: ChannelConstants,
    #[serde(default)]
    pub capture: CaptureSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store: Option<String>,
    /// Defaults to granting the card's own UID.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acl: Option<AccessControlList>,
}

/// Everything a run needs, validated and with files already loaded.
#[derive(Debug, Clone)]
pub struct Environment {
    pub seed: u64,
    pub card: CardConfig,
    pub channel: ChannelConstants,
    pub capture: CaptureSettings,
    pub store: TemplateStore,
    pub acl: AccessControlList,
}

impl Environment {
    pub fn new(config: SimulationConfig, store: TemplateStore) -> Result<Self> {
        config.card.validate()?;
        config.channel.validate()?;
        config.capture.validate()?;
        store.validate()?;
        check_store(&store)?;
        let acl = config.acl.unwrap_or_else(|| AccessControlList::granting(config.card.uid.clone()));
        Ok(Self {
            seed: config.seed,
            card: config.card,
            channel: config.channel,
            capture: config.capture,
            store,
            acl,
        })
    }

    /// Default card and channel with the synthetic A-E store.
    pub fn synthetic(seed: u64) -> Self {
        let config = SimulationConfig {
            seed,
            card: CardConfig::default(),
            channel: ChannelConstants::default(),
            capture: CaptureSettings::default(),
            store: None,
            acl: None,
        };
        Self::new(config, crate::fingerprint::synthetic_store(seed)).expect("synthetic environment is valid")
    }
}

/// One card, one reader, one trace.
pub struct World<'a> {
    env: &'a Environment,
    card: Card,
    reader: Reader,
    seed: u64,
    scans: u64,
    trace: Vec<AccessEvent>,
}

impl<'a> World<'a> {
    pub fn new(env: &'a Environment, seed: u64) -> Result<Self> {
        Self::with_card(env, env.card.clone(), seed)
    }

    pub fn with_card(env: &'a Environment, card: CardConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            env,
            card: Card::new(card)?,
            reader: Reader::new(env.channel)?,
            seed,
            scans: 0,
            trace: Vec::new(),
        })
    }

    pub fn card(&self) -> &Card {
        &self.card
    }

    pub fn reader(&self) -> &Reader {
        &self.reader
    }

    pub fn trace(&self) -> &[AccessEvent] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<AccessEvent> {
        self.trace
    }

    pub fn clock(&self) -> u64 {
        self.card.clock()
    }

    /// Captures the enrolled finger `label` and presents it to the card.
    /// `live = false` models a film replica of that finger.
    pub fn scan(&mut self, label: Label, live: bool) -> Result<()> {
        self.scan_with(label, live, self.env.capture)
    }

    pub fn scan_with(&mut self, label: Label, live: bool, settings: CaptureSettings) -> Result<()> {
        let template = self
            .env
            .store
            .get(label)
            .ok_or_else(|| validation(format!("no enrolled template labelled {label}")))?;
        let scan = capture(template, settings, live, derive_seed(self.seed, self.scans))?;
        self.scans += 1;
        let events = self.card.present(&scan, &self.env.store)?;
        self.trace.extend(events);
        Ok(())
    }

    pub fn wait(&mut self, ms: u64) {
        let events = self.card.advance(ms);
        self.trace.extend(events);
    }

    pub fn tamper(&mut self, kind: TamperKind, shield_breached: bool) {
        let events = self.card.tamper(kind, shield_breached);
        self.trace.extend(events);
    }

    pub fn reset(&mut self) {
        let events = self.card.reset();
        self.trace.extend(events);
    }

    /// Direct read followed by the back-end decision.
    pub fn interrogate(&mut self, link: LinkConditions) -> Result<(Interrogation, Decision)> {
        let gate = self.card.gate_value();
        self.interrogate_path(&[Hop { link, gate_value: gate }])
    }

    /// Read through an arbitrary chain of hops; the last hop must end at the
    /// card and its gate value is taken from the card.
    pub fn interrogate_path(&mut self, hops: &[Hop]) -> Result<(Interrogation, Decision)> {
        let mut hops = hops.to_vec();
        if let Some(last) = hops.last_mut() {
            last.gate_value = self.card.gate_value();
        }
        let clock = self.clock();
        let result = self.reader.interrogate_path(&self.card, &hops, clock)?;
        let decision = access_decision(result.uid.as_ref(), &self.env.acl);
        self.trace.extend(result.events.iter().cloned());
        self.trace.push(decision_event(result.uid.as_ref(), decision, clock));
        Ok((result, decision))
    }

    /// Reads a foreign transponder at the current clock; events go into the
    /// same trace.
    pub fn interrogate_other(&mut self, card: &dyn Transponder, link: LinkConditions) -> Result<(Interrogation, Decision)> {
        let clock = self.clock();
        let result = self.reader.interrogate(card, link, card.gate_value(), clock)?;
        let decision = access_decision(result.uid.as_ref(), &self.env.acl);
        self.trace.extend(result.events.iter().cloned());
        self.trace.push(decision_event(result.uid.as_ref(), decision, clock));
        Ok((result, decision))
    }

    pub fn note(&mut self, kind: EventKind, detail: impl Into<String>) {
        let clock = self.clock();
        self.trace.push(AccessEvent::new(clock, kind, detail));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Scan { label: Label, live: bool },
    Wait(u64),
    Interrogate(LinkConditions),
    Tamper { kind: TamperKind, shield_breached: bool },
    Reset,
}

pub fn parse_step(line: &str) -> Result<Step> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| validation(format!("{what} must be a number, got {s:?}")))
    };
    match words.as_slice() {
        ["scan", label, mode] => {
            let live = match *mode {
                "live" => true,
                "film" => false,
                other => return Err(validation(format!("scan mode must be live or film, got {other:?}"))),
            };
            Ok(Step::Scan { label: label.parse()?, live })
        }
        ["wait", ms] => ms
            .parse()
            .map(Step::Wait)
            .map_err(|_| validation(format!("wait needs whole milliseconds, got {ms:?}"))),
        ["interrogate", d, a] => {
            let link = LinkConditions::new(num(d, "distance")?, num(a, "angle")?);
            link.validate()?;
            Ok(Step::Interrogate(link))
        }
        ["tamper", kind] => Ok(Step::Tamper { kind: kind.parse()?, shield_breached: false }),
        ["tamper", kind, "breached"] => Ok(Step::Tamper { kind: kind.parse()?, shield_breached: true }),
        ["reset"] => Ok(Step::Reset),
        _ => Err(validation(format!("unknown step {line:?}"))),
    }
}

pub fn parse_script(text: &str) -> Result<Vec<Step>> {
    let mut steps = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let step = parse_step(line).map_err(|e| validation(format!("line {}: {e}", n + 1)))?;
        steps.push(step);
    }
    Ok(steps)
}

/// Runs a parsed script against a fresh world seeded from the environment.
pub fn run_script(env: &Environment, steps: &[Step]) -> Result<Vec<AccessEvent>> {
    let mut world = World::new(env, env.seed)?;
    for step in steps {
        match step {
            Step::Scan { label, live } => world.scan(*label, *live)?,
            Step::Wait(ms) => world.wait(*ms),
            Step::Interrogate(link) => {
                world.interrogate(*link)?;
            }
            Step::Tamper { kind, shield_breached } => world.tamper(*kind, *shield_breached),
            Step::Reset => world.reset(),
        }
    }
    Ok(world.into_trace())
}
