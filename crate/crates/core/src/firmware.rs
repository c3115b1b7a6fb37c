//! Card control unit.
//!
//! The relay that closes the antenna clip joint is driven only after two
//! different fingers enrolled with access permission verify within the pairing
//! window. Indicators follow the control output table:
//!
//! | best match role                | indicator | effect                    |
//! |--------------------------------|-----------|---------------------------|
//! | authorized with permission x2  | green     | relay closed, access      |
//! | authorized without permission  | yellow    | denied                    |
//! | unauthorized / no match        | blue      | denied                    |
//! | unauthorized, flagged          | red       | denied, alarm latched     |
//!
//! Transitions are pure functions on [`CardState`]; [`Card`] wraps them with a
//! clock for the simulator.

use serde::{Deserialize, Serialize};

use crate::channel::{Direction, Frame, FrameKind, Uid};
use crate::error::{ensure, validation, Error, Result};
use crate::fingerprint::{match_score, Label, Role, Scan, TemplateStore, DEFAULT_THRESHOLD};
use crate::gate::{communication_process, CommunicationGate};
use crate::trace::{AccessEvent, EventKind};

pub const ATQA: [u8; 2] = [0x04, 0x00];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelayParameters {
    pub coil_voltage: f64,
    pub max_current: f64,
    pub coil_resistance: f64,
    pub actuation_delay_ms: u64,
}

impl Default for RelayParameters {
    fn default() -> Self {
        Self { coil_voltage: 5.0, max_current: 1.0, coil_resistance: 166.0, actuation_delay_ms: 5 }
    }
}

impl RelayParameters {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("coil_voltage", self.coil_voltage),
            ("max_current", self.max_current),
            ("coil_resistance", self.coil_resistance),
        ] {
            ensure(v.is_finite() && v > 0.0, || format!("relay {name} must be > 0, got {v}"))?;
        }
        ensure(self.actuation_delay_ms > 0, || "relay actuation_delay_ms must be > 0".into())?;
        ensure(self.coil_current() <= self.max_current, || {
            format!("coil draws {:.4} A, above the {} A rating", self.coil_current(), self.max_current)
        })
    }

    pub fn coil_current(&self) -> f64 {
        self.coil_voltage / self.coil_resistance
    }
}

fn default_uid() -> Uid {
    Uid::new(vec![0x04, 0xA1, 0xB2, 0xC3]).expect("4-byte uid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CardConfig {
    pub uid: Uid,
    pub session_timeout_ms: u64,
    pub pairing_window_ms: u64,
    pub match_threshold: f64,
    pub relay: RelayParameters,
    /// Red-team what-if: a 5 V injection with the tamper shield breached
    /// really closes the relay.
    pub allow_injection_success: bool,
}

impl Default for CardConfig {
    fn default() -> Self {
        Self {
            uid: default_uid(),
            session_timeout_ms: 10_000,
            pairing_window_ms: 10_000,
            match_threshold: DEFAULT_THRESHOLD,
            relay: RelayParameters::default(),
            allow_injection_success: false,
        }
    }
}

impl CardConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.session_timeout_ms > 0, || "session_timeout_ms must be > 0".into())?;
        ensure(self.pairing_window_ms > 0, || "pairing_window_ms must be > 0".into())?;
        ensure((0.0..=1.0).contains(&self.match_threshold), || {
            format!("match_threshold must lie in [0, 1], got {}", self.match_threshold)
        })?;
        self.relay.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Shielded,
    FirstFactorAccepted,
    Active,
    Alarm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Off,
    Green,
    Yellow,
    Blue,
    Red,
}

impl Indicator {
    pub fn as_str(self) -> &'static str {
        match self {
            Indicator::Off => "off",
            Indicator::Green => "green",
            Indicator::Yellow => "yellow",
            Indicator::Blue => "blue",
            Indicator::Red => "red",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardState {
    pub mode: Mode,
    pub indicator: Indicator,
    pub joint_closed: bool,
    pub session_remaining_ms: u64,
    pub pairing_remaining_ms: u64,
    pub first_factor_label: Option<Label>,
}

impl Default for CardState {
    fn default() -> Self {
        Self::shielded(Indicator::Off)
    }
}

impl CardState {
    pub fn shielded(indicator: Indicator) -> Self {
        Self {
            mode: Mode::Shielded,
            indicator,
            joint_closed: false,
            session_remaining_ms: 0,
            pairing_remaining_ms: 0,
            first_factor_label: None,
        }
    }

    fn alarm() -> Self {
        Self { mode: Mode::Alarm, ..Self::shielded(Indicator::Red) }
    }

    /// Checks the structural invariants tying mode, joint and timers together.
    pub fn is_consistent(&self) -> bool {
        let joint_ok = self.joint_closed == (self.mode == Mode::Active);
        let session_ok = self.session_remaining_ms == 0 || self.mode == Mode::Active;
        let pairing_ok = self.mode == Mode::FirstFactorAccepted
            || (self.pairing_remaining_ms == 0 && self.first_factor_label.is_none());
        joint_ok && session_ok && pairing_ok
    }

    pub fn gate(&self) -> CommunicationGate {
        CommunicationGate::single(self.joint_closed)
    }

    pub fn gate_value(&self) -> u64 {
        communication_process(&self.gate()).expect("single-joint gate is well formed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperKind {
    CableBridge,
    #[serde(rename = "voltage_injection_5v")]
    VoltageInjection5v,
}

impl TamperKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TamperKind::CableBridge => "cable_bridge",
            TamperKind::VoltageInjection5v => "voltage_injection_5v",
        }
    }
}

impl std::str::FromStr for TamperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cable_bridge" => Ok(TamperKind::CableBridge),
            "voltage_injection_5v" => Ok(TamperKind::VoltageInjection5v),
            _ => Err(validation(format!("unknown tamper kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: CardState,
    pub events: Vec<AccessEvent>,
}

impl Transition {
    pub fn indicator(&self) -> Indicator {
        self.state.indicator
    }
}

/// Checks that the store holds exactly the two permission-bearing fingers.
pub fn check_store(store: &TemplateStore) -> Result<()> {
    let permitted = store.iter().filter(|t| t.role == Role::AuthorizedWithPermission).count();
    if permitted != 2 {
        return Err(Error::Configuration(format!(
            "store must hold exactly two authorized_with_permission templates, found {permitted}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Firmware {
    config: CardConfig,
}

impl Firmware {
    pub fn new(config: CardConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &CardConfig {
        &self.config
    }

    fn relay_at(&self, clock: u64) -> u64 {
        clock + self.config.relay.actuation_delay_ms
    }

    fn close_session(&self, clock: u64, why: &str) -> (CardState, Vec<AccessEvent>) {
        let state = CardState {
            mode: Mode::Active,
            indicator: Indicator::Green,
            joint_closed: true,
            session_remaining_ms: self.config.session_timeout_ms,
            pairing_remaining_ms: 0,
            first_factor_label: None,
        };
        let events = vec![AccessEvent::new(self.relay_at(clock), EventKind::JointClosed, why)];
        (state, events)
    }

    fn open_if_closed(&self, state: &CardState, clock: u64, events: &mut Vec<AccessEvent>, why: &str) {
        if state.joint_closed {
            events.push(AccessEvent::new(self.relay_at(clock), EventKind::JointOpened, why));
        }
    }

    /// Best verifying template: highest score among those that pass, ties to
    /// the lower label.
    fn best_match<'a>(&self, scan: &Scan, store: &'a TemplateStore) -> Result<Option<(&'a crate::fingerprint::FingerprintTemplate, f64)>> {
        let mut best: Option<(&crate::fingerprint::FingerprintTemplate, f64)> = None;
        if !scan.live {
            return Ok(None);
        }
        for t in store.iter() {
            let score = match_score(scan, t)?;
            if score < self.config.match_threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, s)) => score > s || (score == s && t.label < b.label),
            };
            if better {
                best = Some((t, score));
            }
        }
        Ok(best)
    }

    pub fn on_scan(&self, state: &CardState, scan: &Scan, store: &TemplateStore, clock: u64) -> Result<Transition> {
        check_store(store)?;
        scan.validate()?;
        let mut events = Vec::new();
        if state.mode == Mode::Alarm {
            events.push(AccessEvent::new(clock, EventKind::ScanRejected, "card in alarm; scan ignored"));
            return Ok(Transition { state: state.clone(), events });
        }
        let Some((template, score)) = self.best_match(scan, store)? else {
            let why = if scan.live { "no template verified" } else { "liveness check failed" };
            events.push(AccessEvent::new(clock, EventKind::ScanRejected, format!("{why}: unauthorized user, access denied")));
            self.open_if_closed(state, clock, &mut events, "session ended by rejected scan");
            return Ok(Transition { state: CardState::shielded(Indicator::Blue), events });
        };
        let label = template.label;
        let next = match template.role {
            Role::AuthorizedWithPermission => match (state.mode, state.first_factor_label) {
                (Mode::Shielded, _) => {
                    events.push(AccessEvent::new(clock, EventKind::ScanAccepted, format!("{label} first factor (score {score:.3})")));
                    CardState {
                        mode: Mode::FirstFactorAccepted,
                        indicator: Indicator::Off,
                        joint_closed: false,
                        session_remaining_ms: 0,
                        pairing_remaining_ms: self.config.pairing_window_ms,
                        first_factor_label: Some(label),
                    }
                }
                (Mode::FirstFactorAccepted, Some(first)) if first != label => {
                    events.push(AccessEvent::new(clock, EventKind::ScanAccepted, format!("{label} second factor (score {score:.3})")));
                    let (next, closed) = self.close_session(clock, &format!("{first}+{label} authorized with access permission, access granted"));
                    events.extend(closed);
                    next
                }
                (Mode::FirstFactorAccepted, _) => {
                    events.push(AccessEvent::new(clock, EventKind::ScanRejected, format!("{label} already presented; a distinct finger is required")));
                    state.clone()
                }
                (Mode::Active, _) => {
                    events.push(AccessEvent::new(clock, EventKind::ScanAccepted, format!("{label} verified; session already active")));
                    state.clone()
                }
                (Mode::Alarm, _) => unreachable!("alarm handled above"),
            },
            Role::AuthorizedWithoutPermission => {
                events.push(AccessEvent::new(clock, EventKind::ScanRejected, format!("{label} authorized user without access permission, access denied")));
                self.open_if_closed(state, clock, &mut events, "session ended by rejected scan");
                CardState::shielded(Indicator::Yellow)
            }
            Role::Unauthorized => {
                events.push(AccessEvent::new(clock, EventKind::ScanRejected, format!("{label} unauthorized user, access denied")));
                self.open_if_closed(state, clock, &mut events, "session ended by rejected scan");
                CardState::shielded(Indicator::Blue)
            }
            Role::UnauthorizedFlagged => {
                events.push(AccessEvent::new(clock, EventKind::ScanRejected, format!("{label} unauthorized user, access denied")));
                self.open_if_closed(state, clock, &mut events, "alarm");
                events.push(AccessEvent::new(clock, EventKind::Alarm, format!("{label} flagged identity; warning raised")));
                CardState::alarm()
            }
        };
        Ok(Transition { state: next, events })
    }

    /// Advances timers by `elapsed` ms starting at `clock`.
    pub fn tick(&self, state: &CardState, clock: u64, elapsed: u64) -> Transition {
        let mut next = state.clone();
        let mut events = Vec::new();
        match state.mode {
            Mode::Active => {
                if elapsed >= state.session_remaining_ms {
                    let at = clock + state.session_remaining_ms;
                    events.push(AccessEvent::new(at, EventKind::Timeout, "session expired"));
                    events.push(AccessEvent::new(at, EventKind::JointOpened, "relay released"));
                    next = CardState::shielded(Indicator::Off);
                } else {
                    next.session_remaining_ms -= elapsed;
                }
            }
            Mode::FirstFactorAccepted => {
                if elapsed > state.pairing_remaining_ms {
                    let at = clock + state.pairing_remaining_ms;
                    events.push(AccessEvent::new(at, EventKind::Timeout, "pairing window expired"));
                    next = CardState::shielded(Indicator::Off);
                } else {
                    next.pairing_remaining_ms -= elapsed;
                }
            }
            Mode::Shielded | Mode::Alarm => {}
        }
        Transition { state: next, events }
    }

    pub fn tamper_event(&self, state: &CardState, kind: TamperKind, tamper_shield_breached: bool, clock: u64) -> Transition {
        let mut events = Vec::new();
        let next = match kind {
            TamperKind::CableBridge => {
                events.push(AccessEvent::new(clock, EventKind::Tamper, "cable bridge across clip joint; relay state unchanged"));
                state.clone()
            }
            TamperKind::VoltageInjection5v if tamper_shield_breached && self.config.allow_injection_success => {
                events.push(AccessEvent::new(clock, EventKind::Tamper, "BREACH: 5 V injected behind breached shield forces relay"));
                if state.joint_closed {
                    CardState { first_factor_label: None, pairing_remaining_ms: 0, ..state.clone() }
                } else {
                    let (mut next, closed) = self.close_session(clock, "relay forced closed by injection");
                    next.indicator = state.indicator;
                    events.extend(closed);
                    next
                }
            }
            TamperKind::VoltageInjection5v => {
                events.push(AccessEvent::new(clock, EventKind::Tamper, "5 V injection on relay driver detected"));
                self.open_if_closed(state, clock, &mut events, "alarm");
                events.push(AccessEvent::new(clock, EventKind::Alarm, "tamper alarm latched"));
                CardState::alarm()
            }
        };
        Transition { state: next, events }
    }

    /// Administrative reset back to the shielded idle state.
    pub fn reset(&self, state: &CardState, clock: u64) -> Transition {
        let mut events = Vec::new();
        self.open_if_closed(state, clock, &mut events, "reset");
        events.insert(0, AccessEvent::new(clock, EventKind::Reset, "administrative reset"));
        Transition { state: CardState::default(), events }
    }

    /// Tag behaviour: only a card with its joint closed answers.
    pub fn respond(&self, state: &CardState, frame: &Frame) -> Result<Option<Frame>> {
        frame.validate()?;
        if frame.direction != Direction::ReaderToCard {
            return Err(validation("card only accepts reader-to-card frames"));
        }
        let reply = match frame.kind {
            FrameKind::Reqa => Some(Frame::new(Direction::CardToReader, FrameKind::Atqa, ATQA.to_vec())),
            FrameKind::Select => Some(Frame::new(
                Direction::CardToReader,
                FrameKind::UidResponse,
                self.config.uid.as_bytes().to_vec(),
            )),
            FrameKind::Halt => None,
            FrameKind::Atqa | FrameKind::UidResponse => {
                return Err(validation(format!("{} is not a reader command", frame.kind)))
            }
        };
        Ok(reply.filter(|_| state.mode == Mode::Active && state.joint_closed))
    }
}

/// A firmware instance with its state and a millisecond clock.
#[derive(Debug, Clone)]
pub struct Card {
    firmware: Firmware,
    state: CardState,
    clock: u64,
}

impl Card {
    pub fn new(config: CardConfig) -> Result<Self> {
        Ok(Self { firmware: Firmware::new(config)?, state: CardState::default(), clock: 0 })
    }

    pub fn state(&self) -> &CardState {
        &self.state
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn firmware(&self) -> &Firmware {
        &self.firmware
    }

    pub fn uid(&self) -> &Uid {
        &self.firmware.config.uid
    }

    fn apply(&mut self, t: Transition) -> Vec<AccessEvent> {
        self.state = t.state;
        if let Some(last) = t.events.iter().map(|e| e.timestamp).max() {
            self.clock = self.clock.max(last);
        }
        t.events
    }

    pub fn present(&mut self, scan: &Scan, store: &TemplateStore) -> Result<Vec<AccessEvent>> {
        let t = self.firmware.on_scan(&self.state, scan, store, self.clock)?;
        Ok(self.apply(t))
    }

    pub fn advance(&mut self, elapsed: u64) -> Vec<AccessEvent> {
        let t = self.firmware.tick(&self.state, self.clock, elapsed);
        let start = self.clock;
        let events = self.apply(t);
        self.clock = self.clock.max(start + elapsed);
        events
    }

    pub fn tamper(&mut self, kind: TamperKind, tamper_shield_breached: bool) -> Vec<AccessEvent> {
        let t = self.firmware.tamper_event(&self.state, kind, tamper_shield_breached, self.clock);
        self.apply(t)
    }

    pub fn reset(&mut self) -> Vec<AccessEvent> {
        let t = self.firmware.reset(&self.state, self.clock);
        self.apply(t)
    }

    pub fn respond(&self, frame: &Frame) -> Result<Option<Frame>> {
        self.firmware.respond(&self.state, frame)
    }
}
