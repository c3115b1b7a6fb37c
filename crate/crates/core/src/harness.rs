//! Attack scenarios run against an isolated card+reader world, and the
//! threat matrix derived from their outcomes.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::LinkConditions;
use crate::derive_seed;
use crate::error::{validation, Result};
use crate::fingerprint::{CaptureSettings, Label};
use crate::firmware::{Mode, TamperKind};
use crate::reader::{Hop, Permission, PlainCard};
use crate::sim::{Environment, World};
use crate::trace::{AccessEvent, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    TagManipulation,
    ClipBridgeCable,
    #[serde(rename = "clip_inject_5v")]
    ClipInject5v,
    ForgedFilmFingerprint,
    UnauthorizedRead,
    CloneAttempt,
    RelayAttack,
    Skimming,
    ClandestineTracking,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::TagManipulation => "tag_manipulation",
            AttackKind::ClipBridgeCable => "clip_bridge_cable",
            AttackKind::ClipInject5v => "clip_inject_5v",
            AttackKind::ForgedFilmFingerprint => "forged_film_fingerprint",
            AttackKind::UnauthorizedRead => "unauthorized_read",
            AttackKind::CloneAttempt => "clone_attempt",
            AttackKind::RelayAttack => "relay_attack",
            AttackKind::Skimming => "skimming",
            AttackKind::ClandestineTracking => "clandestine_tracking",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distance x angle grid swept without authorisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub max_distance: f64,
    pub distance_step: f64,
    pub max_angle: f64,
    pub angle_step: f64,
    /// Time between successive reads, ms.
    pub interval_ms: u64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self { max_distance: 100.0, distance_step: 5.0, max_angle: 90.0, angle_step: 15.0, interval_ms: 10 }
    }
}

impl Sweep {
    fn validate(&self) -> Result<()> {
        let ok = self.max_distance >= 0.0
            && self.distance_step > 0.0
            && (0.0..=90.0).contains(&self.max_angle)
            && self.angle_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(validation(format!("invalid sweep {self:?}")))
        }
    }

    pub fn links(&self) -> Vec<LinkConditions> {
        let steps = |max: f64, step: f64| (0..).map(move |i| i as f64 * step).take_while(move |v| *v <= max + 1e-9);
        steps(self.max_distance, self.distance_step)
            .flat_map(|d| steps(self.max_angle, self.angle_step).map(move |a| LinkConditions::new(d, a.min(90.0))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub sweep: Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionParams {
    pub shield_breached: bool,
    /// Overrides the card configuration's what-if flag for this scenario.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_injection_success: Option<bool>,
    pub sweep: Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForgeryParams {
    /// Positional noise of the replica; 0 copies the residue print exactly.
    pub noise_stddev: f64,
    pub probe: LinkConditions,
}

impl Default for ForgeryParams {
    fn default() -> Self {
        Self { noise_stddev: 0.0, probe: LinkConditions::new(10.0, 0.0) }
    }
}

/// Repeated covert reads from randomly placed readers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SilentReadParams {
    pub interrogations: u32,
    pub interval_ms: u64,
    pub max_distance: f64,
    pub max_angle: f64,
}

impl Default for SilentReadParams {
    fn default() -> Self {
        Self { interrogations: 50, interval_ms: 1_000, max_distance: 100.0, max_angle: 90.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloneParams {
    pub probe: LinkConditions,
}

impl Default for CloneParams {
    fn default() -> Self {
        Self { probe: LinkConditions::new(10.0, 0.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelayParams {
    /// Holder has just authenticated, so the joint is closed during the relay.
    pub session_active: bool,
    /// Legitimate reader to attacker proxy.
    pub reader_link: LinkConditions,
    /// Attacker mole to victim card.
    pub card_link: LinkConditions,
}

impl Default for RelayParams {
    fn default() -> Self {
        Self {
            session_active: true,
            reader_link: LinkConditions::new(20.0, 0.0),
            card_link: LinkConditions::new(15.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackScenario {
    TagManipulation(SweepParams),
    ClipBridgeCable(SweepParams),
    ClipInject5v(InjectionParams),
    ForgedFilmFingerprint(ForgeryParams),
    UnauthorizedRead(SilentReadParams),
    CloneAttempt(CloneParams),
    RelayAttack(RelayParams),
    Skimming(SilentReadParams),
    ClandestineTracking(SilentReadParams),
}

impl AttackScenario {
    pub fn kind(&self) -> AttackKind {
        match self {
            AttackScenario::TagManipulation(_) => AttackKind::TagManipulation,
            AttackScenario::ClipBridgeCable(_) => AttackKind::ClipBridgeCable,
            AttackScenario::ClipInject5v(_) => AttackKind::ClipInject5v,
            AttackScenario::ForgedFilmFingerprint(_) => AttackKind::ForgedFilmFingerprint,
            AttackScenario::UnauthorizedRead(_) => AttackKind::UnauthorizedRead,
            AttackScenario::CloneAttempt(_) => AttackKind::CloneAttempt,
            AttackScenario::RelayAttack(_) => AttackKind::RelayAttack,
            AttackScenario::Skimming(_) => AttackKind::Skimming,
            AttackScenario::ClandestineTracking(_) => AttackKind::ClandestineTracking,
        }
    }

    pub fn default_for(kind: AttackKind) -> Self {
        Self::from_parameters(kind, Value::Null).expect("defaults are valid")
    }

    /// Schema-checks `parameters` for `kind`. Unknown fields are rejected.
    pub fn from_parameters(kind: AttackKind, parameters: Value) -> Result<Self> {
        fn parse<T: serde::de::DeserializeOwned + Default>(kind: AttackKind, v: Value) -> Result<T> {
            if v.is_null() {
                return Ok(T::default());
            }
            serde_json::from_value(v).map_err(|e| validation(format!("{kind} parameters: {e}")))
        }
        let s = match kind {
            AttackKind::TagManipulation => AttackScenario::TagManipulation(parse(kind, parameters)?),
            AttackKind::ClipBridgeCable => AttackScenario::ClipBridgeCable(parse(kind, parameters)?),
            AttackKind::ClipInject5v => AttackScenario::ClipInject5v(parse(kind, parameters)?),
            AttackKind::ForgedFilmFingerprint => AttackScenario::ForgedFilmFingerprint(parse(kind, parameters)?),
            AttackKind::UnauthorizedRead => AttackScenario::UnauthorizedRead(parse(kind, parameters)?),
            AttackKind::CloneAttempt => AttackScenario::CloneAttempt(parse(kind, parameters)?),
            AttackKind::RelayAttack => AttackScenario::RelayAttack(parse(kind, parameters)?),
            AttackKind::Skimming => AttackScenario::Skimming(parse(kind, parameters)?),
            AttackKind::ClandestineTracking => AttackScenario::ClandestineTracking(parse(kind, parameters)?),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn parameters(&self) -> Value {
        let v = match self {
            AttackScenario::TagManipulation(p) | AttackScenario::ClipBridgeCable(p) => serde_json::to_value(p),
            AttackScenario::ClipInject5v(p) => serde_json::to_value(p),
            AttackScenario::ForgedFilmFingerprint(p) => serde_json::to_value(p),
            AttackScenario::UnauthorizedRead(p) | AttackScenario::Skimming(p) | AttackScenario::ClandestineTracking(p) => {
                serde_json::to_value(p)
            }
            AttackScenario::CloneAttempt(p) => serde_json::to_value(p),
            AttackScenario::RelayAttack(p) => serde_json::to_value(p),
        };
        v.expect("parameters serialize")
    }

    fn validate(&self) -> Result<()> {
        match self {
            AttackScenario::TagManipulation(p) | AttackScenario::ClipBridgeCable(p) => p.sweep.validate(),
            AttackScenario::ClipInject5v(p) => p.sweep.validate(),
            AttackScenario::ForgedFilmFingerprint(p) => {
                CaptureSettings { noise_stddev: p.noise_stddev, dropout_probability: 0.0 }.validate()?;
                p.probe.validate()
            }
            AttackScenario::UnauthorizedRead(p) | AttackScenario::Skimming(p) | AttackScenario::ClandestineTracking(p) => {
                LinkConditions::new(p.max_distance, p.max_angle).validate()
            }
            AttackScenario::CloneAttempt(p) => p.probe.validate(),
            AttackScenario::RelayAttack(p) => {
                p.reader_link.validate()?;
                p.card_link.validate()
            }
        }
    }

    /// Verdict the concept is expected to earn: everything is mitigated except
    /// relaying an already-open session.
    pub fn expected_mitigated(&self) -> bool {
        !matches!(self, AttackScenario::RelayAttack(RelayParams { session_active: true, .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    kind: AttackKind,
    #[serde(default)]
    parameters: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expect_mitigated: Option<bool>,
}

/// One suite record: `{"kind": ..., "parameters": {...}, "expect_mitigated": ..., "name": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEntry", into = "RawEntry")]
pub struct SuiteEntry {
    pub name: String,
    pub scenario: AttackScenario,
    pub expect_mitigated: bool,
}

impl SuiteEntry {
    pub fn new(scenario: AttackScenario) -> Self {
        Self { name: scenario.kind().to_string(), expect_mitigated: scenario.expected_mitigated(), scenario }
    }

    pub fn named(name: &str, scenario: AttackScenario) -> Self {
        Self { name: name.to_string(), ..Self::new(scenario) }
    }
}

impl TryFrom<RawEntry> for SuiteEntry {
    type Error = crate::Error;

    fn try_from(raw: RawEntry) -> Result<Self> {
        let scenario = AttackScenario::from_parameters(raw.kind, raw.parameters)?;
        Ok(Self {
            name: raw.name.unwrap_or_else(|| raw.kind.to_string()),
            expect_mitigated: raw.expect_mitigated.unwrap_or_else(|| scenario.expected_mitigated()),
            scenario,
        })
    }
}

impl From<SuiteEntry> for RawEntry {
    fn from(e: SuiteEntry) -> Self {
        RawEntry {
            name: Some(e.name),
            kind: e.scenario.kind(),
            parameters: e.scenario.parameters(),
            expect_mitigated: Some(e.expect_mitigated),
        }
    }
}

pub fn parse_suite(json: &str) -> Result<Vec<SuiteEntry>> {
    serde_json::from_str(json).map_err(|e| validation(format!("scenario suite: {e}")))
}

/// Every scenario kind with default parameters; the relay attack appears
/// twice, against an idle card and during an open session.
pub fn default_suite() -> Vec<SuiteEntry> {
    use AttackKind::*;
    let mut suite: Vec<SuiteEntry> = [
        TagManipulation,
        ClipBridgeCable,
        ClipInject5v,
        ForgedFilmFingerprint,
        UnauthorizedRead,
        Skimming,
        ClandestineTracking,
        CloneAttempt,
    ]
    .into_iter()
    .map(|k| SuiteEntry::new(AttackScenario::default_for(k)))
    .collect();
    suite.push(SuiteEntry::named(
        "relay_attack_idle",
        AttackScenario::RelayAttack(RelayParams { session_active: false, ..RelayParams::default() }),
    ));
    suite.push(SuiteEntry::named("relay_attack_session", AttackScenario::RelayAttack(RelayParams::default())));
    suite
}

/// Result for a comparison card that lacks the clip joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mitigated: bool,
    pub trace: Vec<AccessEvent>,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub name: String,
    pub kind: AttackKind,
    pub seed: u64,
    pub mitigated: bool,
    pub expected_mitigated: bool,
    pub responses_observed: u32,
    pub uids_delivered: u32,
    pub grants: u32,
    pub trace: Vec<AccessEvent>,
    pub notes: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Baseline>,
}

impl AttackOutcome {
    pub fn matches_expectation(&self) -> bool {
        self.mitigated == self.expected_mitigated
    }
}

#[derive(Default)]
struct Tally {
    responses: u32,
    uids: u32,
    grants: u32,
}

impl Tally {
    fn read(&mut self, world: &mut World<'_>, link: LinkConditions) -> Result<()> {
        let (r, decision) = world.interrogate(link)?;
        self.absorb(r.responses, r.uid.is_some(), decision);
        Ok(())
    }

    fn absorb(&mut self, responses: u32, uid: bool, decision: Permission) {
        self.responses += responses;
        self.uids += u32::from(uid);
        self.grants += u32::from(decision == Permission::Granted);
    }

    fn sweep(&mut self, world: &mut World<'_>, sweep: &Sweep) -> Result<()> {
        for link in sweep.links() {
            self.read(world, link)?;
            world.wait(sweep.interval_ms);
        }
        Ok(())
    }
}

/// The two permission-bearing labels in the store, in label order.
fn permitted_pair(env: &Environment) -> (Label, Label) {
    let mut labels: Vec<Label> = env
        .store
        .iter()
        .filter(|t| t.role == crate::fingerprint::Role::AuthorizedWithPermission)
        .map(|t| t.label)
        .collect();
    labels.sort();
    (labels[0], labels[1])
}

pub fn run_scenario(entry: &SuiteEntry, env: &Environment, seed: u64) -> Result<AttackOutcome> {
    let mut tally = Tally::default();
    let mut baseline = None;
    let (first, second) = permitted_pair(env);
    let (trace, mitigated, notes) = match entry.scenario {
        AttackScenario::TagManipulation(p) => {
            let mut world = World::new(env, seed)?;
            tally.sweep(&mut world, &p.sweep)?;
            let n = p.sweep.links().len();
            let notes = format!("{n} unauthenticated reads across the distance/angle grid; {} card frames observed", tally.responses);
            (world.into_trace(), tally.responses == 0, notes)
        }
        AttackScenario::ClipBridgeCable(p) => {
            let mut world = World::new(env, seed)?;
            world.tamper(TamperKind::CableBridge, false);
            tally.sweep(&mut world, &p.sweep)?;
            let notes = format!("cable bridge then full sweep; {} card frames observed", tally.responses);
            (world.into_trace(), tally.responses == 0, notes)
        }
        AttackScenario::ClipInject5v(p) => {
            let mut card = env.card.clone();
            if let Some(flag) = p.allow_injection_success {
                card.allow_injection_success = flag;
            }
            let what_if = card.allow_injection_success && p.shield_breached;
            let mut world = World::with_card(env, card, seed)?;
            world.tamper(TamperKind::VoltageInjection5v, p.shield_breached);
            let mode = world.card().state().mode;
            tally.sweep(&mut world, &p.sweep)?;
            let notes = format!(
                "5 V injection (shield {}, what-if {}); card mode after injection: {mode:?}; {} UIDs delivered",
                if p.shield_breached { "breached" } else { "intact" },
                if what_if { "on" } else { "off" },
                tally.uids
            );
            (world.into_trace(), tally.uids == 0, notes)
        }
        AttackScenario::ForgedFilmFingerprint(p) => {
            let mut world = World::new(env, seed)?;
            let film = CaptureSettings { noise_stddev: p.noise_stddev, dropout_probability: 0.0 };
            world.scan_with(first, false, film)?;
            world.scan_with(second, false, film)?;
            tally.read(&mut world, p.probe)?;
            let closed = world.trace().iter().any(|e| e.kind == EventKind::JointClosed);
            let notes = format!("film replicas of {first} and {second} presented; joint closed: {closed}");
            (world.into_trace(), !closed && tally.grants == 0, notes)
        }
        AttackScenario::UnauthorizedRead(p) | AttackScenario::Skimming(p) | AttackScenario::ClandestineTracking(p) => {
            let mut world = World::new(env, seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5EED));
            for _ in 0..p.interrogations {
                let link = LinkConditions::new(rng.random_range(0.0..=p.max_distance), rng.random_range(0.0..=p.max_angle));
                tally.read(&mut world, link)?;
                world.wait(p.interval_ms);
            }
            let notes = format!(
                "{} covert reads of an idle card within {} mm; {} card frames observed",
                p.interrogations, p.max_distance, tally.responses
            );
            (world.into_trace(), tally.responses == 0, notes)
        }
        AttackScenario::CloneAttempt(p) => {
            let mut world = World::new(env, seed)?;
            world.note(EventKind::Interrogation, "attacker attempts to harvest the uid from the idle card");
            let (harvest, decision) = world.interrogate(p.probe)?;
            tally.absorb(harvest.responses, harvest.uid.is_some(), decision);
            let harvested = harvest.uid.is_some();

            // Counterfactual: the uid leaked elsewhere and is written to a plain card.
            let mut plain_world = World::new(env, seed)?;
            let clone = PlainCard { uid: env.card.uid.clone() };
            plain_world.note(EventKind::Interrogation, format!("plain clone carrying uid={}", clone.uid));
            let (_, plain_decision) = plain_world.interrogate_other(&clone, p.probe)?;
            let plain_mitigated = plain_decision != Permission::Granted;
            baseline = Some(Baseline {
                mitigated: plain_mitigated,
                trace: plain_world.into_trace(),
                notes: "a plain card carrying the uid is accepted by the reader; only the gate protects the uid".into(),
            });
            let notes = format!(
                "uid harvested from the gated card: {harvested}; plain clone accepted: {}",
                !plain_mitigated
            );
            (world.into_trace(), !harvested && tally.grants == 0, notes)
        }
        AttackScenario::RelayAttack(p) => {
            let mut world = World::new(env, seed)?;
            if p.session_active {
                world.scan(first, true)?;
                world.scan(second, true)?;
            }
            let active = world.card().state().mode == Mode::Active;
            world.note(EventKind::Interrogation, "relay: reader -> proxy -> mole -> card");
            let hops = [Hop { link: p.reader_link, gate_value: 1 }, Hop { link: p.card_link, gate_value: 0 }];
            let (r, decision) = world.interrogate_path(&hops)?;
            tally.absorb(r.responses, r.uid.is_some(), decision);
            let notes = format!(
                "relayed read with card {}; access {}",
                if active { "in an open session" } else { "idle" },
                if decision == Permission::Granted { "granted" } else { "denied" }
            );
            (world.into_trace(), tally.grants == 0, notes)
        }
    };
    Ok(AttackOutcome {
        name: entry.name.clone(),
        kind: entry.scenario.kind(),
        seed,
        mitigated,
        expected_mitigated: entry.expect_mitigated,
        responses_observed: tally.responses,
        uids_delivered: tally.uids,
        grants: tally.grants,
        trace,
        notes,
        baseline,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Mitigated,
    NotMitigated,
    /// The card itself resists but the attack succeeds by another route.
    Partial,
    NotSimulated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Mitigated => "mitigated",
            Verdict::NotMitigated => "not mitigated",
            Verdict::Partial => "partial",
            Verdict::NotSimulated => "not simulated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub threat: String,
    pub verdict: Verdict,
    /// Names of the scenarios whose outcomes back the verdict.
    pub evidence: Vec<String>,
}

fn all_mitigated(outcomes: &[&AttackOutcome]) -> Verdict {
    if outcomes.iter().all(|o| o.mitigated) {
        Verdict::Mitigated
    } else {
        Verdict::NotMitigated
    }
}

fn clone_verdict(outcomes: &[&AttackOutcome]) -> Verdict {
    let gated = outcomes.iter().all(|o| o.mitigated);
    let plain = outcomes.iter().all(|o| o.baseline.as_ref().is_none_or(|b| b.mitigated));
    match (gated, plain) {
        (true, true) => Verdict::Mitigated,
        (true, false) => Verdict::Partial,
        _ => Verdict::NotMitigated,
    }
}

/// One row per threat column, built only from scenarios present in
/// `outcomes`.
pub fn countermeasure_matrix(outcomes: &[AttackOutcome]) -> Vec<MatrixRow> {
    type Rule = fn(&[&AttackOutcome]) -> Verdict;
    type Select = Box<dyn Fn(&AttackOutcome) -> bool>;
    let is = |k: AttackKind| move |o: &AttackOutcome| o.kind == k;
    let relay = |active: bool| {
        move |o: &AttackOutcome| {
            o.kind == AttackKind::RelayAttack && o.trace.iter().any(|e| e.kind == EventKind::ScanAccepted) == active
        }
    };
    let unauthorized_use = |o: &AttackOutcome| {
        matches!(
            o.kind,
            AttackKind::TagManipulation | AttackKind::ClipBridgeCable | AttackKind::ClipInject5v | AttackKind::ForgedFilmFingerprint
        )
    };
    let rows: Vec<(&str, Select, Rule)> = vec![
        ("unauthorized card reading", Box::new(is(AttackKind::UnauthorizedRead)), all_mitigated),
        ("unauthorized card use", Box::new(unauthorized_use), all_mitigated),
        ("tag cloning", Box::new(is(AttackKind::CloneAttempt)), clone_verdict),
        ("relay attack (idle card)", Box::new(relay(false)), all_mitigated),
        ("relay attack (active session)", Box::new(relay(true)), all_mitigated),
        ("skimming", Box::new(is(AttackKind::Skimming)), all_mitigated),
        ("spoofing", Box::new(is(AttackKind::CloneAttempt)), clone_verdict),
        // a kill command is just another frame the idle card never receives
        ("unauthorized killing", Box::new(is(AttackKind::UnauthorizedRead)), all_mitigated),
        ("clandestine tracking", Box::new(is(AttackKind::ClandestineTracking)), all_mitigated),
    ];
    let mut matrix = Vec::new();
    for (threat, select, rule) in rows {
        let backing: Vec<&AttackOutcome> = outcomes.iter().filter(|o| select(o)).collect();
        if backing.is_empty() {
            continue;
        }
        matrix.push(MatrixRow {
            threat: threat.to_string(),
            verdict: rule(&backing),
            evidence: backing.iter().map(|o| o.name.clone()).collect(),
        });
    }
    if !outcomes.is_empty() {
        matrix.push(MatrixRow {
            threat: "physical layer identification".into(),
            verdict: Verdict::NotSimulated,
            evidence: Vec::new(),
        });
    }
    matrix
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub outcomes: Vec<AttackOutcome>,
    pub matrix: Vec<MatrixRow>,
}

impl SuiteReport {
    pub fn all_as_expected(&self) -> bool {
        self.outcomes.iter().all(AttackOutcome::matches_expectation)
    }

    pub fn verdict(&self, threat: &str) -> Option<Verdict> {
        self.matrix.iter().find(|r| r.threat == threat).map(|r| r.verdict)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if self.outcomes.is_empty() {
            return out;
        }
        out.push_str("scenarios:\n");
        let width = self.outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
        for o in &self.outcomes {
            let flag = if o.matches_expectation() { "ok" } else { "MISMATCH" };
            let _ = writeln!(
                out,
                "  {:<width$}  {:<13}  expected {:<13}  {:<8}  responses={} uids={} grants={}  {}",
                o.name,
                if o.mitigated { "mitigated" } else { "not mitigated" },
                if o.expected_mitigated { "mitigated" } else { "not mitigated" },
                flag,
                o.responses_observed,
                o.uids_delivered,
                o.grants,
                o.notes,
            );
        }
        out.push_str("countermeasure matrix:\n");
        for row in &self.matrix {
            let evidence = if row.evidence.is_empty() {
                "(outside the simulated model)".to_string()
            } else {
                format!("[{}]", row.evidence.join(", "))
            };
            let _ = writeln!(out, "  {}: {}  {evidence}", row.threat, row.verdict.as_str());
        }
        out
    }
}

/// Runs every entry in its own world. Results keep suite order.
pub fn run_suite(entries: &[SuiteEntry], env: &Environment, seed: u64) -> Result<SuiteReport> {
    let run = |(i, e): (usize, &SuiteEntry)| run_scenario(e, env, derive_seed(seed, i as u64));
    #[cfg(feature = "parallel")]
    let outcomes: Result<Vec<_>> = {
        use rayon::prelude::*;
        entries.par_iter().enumerate().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Result<Vec<_>> = entries.iter().enumerate().map(run).collect();
    let outcomes = outcomes?;
    let matrix = countermeasure_matrix(&outcomes);
    Ok(SuiteReport { outcomes, matrix })
}
