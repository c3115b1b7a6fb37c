//! Synthetic minutiae fingerprints: enrollment, noisy capture, greedy
//! matching, liveness-gated verification and FAR/FRR estimation.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{ensure, validation, Error, Result};

pub const MIN_POINTS: usize = 4;
pub const MAX_POINTS: usize = 40;
/// Pairing tolerance in normalized coordinates.
pub const MATCH_DISTANCE: f64 = 0.05;
/// Pairing tolerance on orientation, degrees.
pub const MATCH_ANGLE: f64 = 15.0;
pub const DEFAULT_THRESHOLD: f64 = 0.6;
/// Orientation jitter cap applied by `capture`, degrees.
pub const MAX_ORIENTATION_JITTER: f64 = 10.0;
/// Degrees of orientation standard deviation per unit of positional noise.
pub const ORIENTATION_NOISE_PER_UNIT: f64 = 250.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinutiaKind {
    RidgeEnding,
    Bifurcation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinutiaPoint {
    pub x: f64,
    pub y: f64,
    pub orientation: f64,
    pub kind: MinutiaKind,
}

impl MinutiaPoint {
    pub fn validate(&self) -> Result<()> {
        ensure((0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y), || {
            format!("minutia ({}, {}) outside the unit square", self.x, self.y)
        })?;
        ensure((0.0..360.0).contains(&self.orientation), || {
            format!("orientation {} outside [0, 360)", self.orientation)
        })
    }

    fn distance(&self, other: &Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn angle_gap(&self, other: &Self) -> f64 {
        let d = (self.orientation - other.orientation).rem_euclid(360.0);
        d.min(360.0 - d)
    }
}

/// Single ASCII letter naming an enrolled finger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label(char);

impl Label {
    pub fn new(c: char) -> Result<Self> {
        ensure(c.is_ascii_alphabetic(), || format!("label must be a single letter, got {c:?}"))?;
        Ok(Self(c.to_ascii_uppercase()))
    }

    pub fn as_char(self) -> char {
        self.0
    }
}

impl TryFrom<String> for Label {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Label> for String {
    fn from(l: Label) -> Self {
        l.0.to_string()
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Label::new(c),
            _ => Err(validation(format!("label must be a single letter, got {s:?}"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    AuthorizedWithPermission,
    AuthorizedWithoutPermission,
    Unauthorized,
    UnauthorizedFlagged,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::AuthorizedWithPermission,
        Role::AuthorizedWithoutPermission,
        Role::Unauthorized,
        Role::UnauthorizedFlagged,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::AuthorizedWithPermission => "authorized_with_permission",
            Role::AuthorizedWithoutPermission => "authorized_without_permission",
            Role::Unauthorized => "unauthorized",
            Role::UnauthorizedFlagged => "unauthorized_flagged",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| validation(format!("unknown role {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerprintTemplate {
    pub label: Label,
    pub role: Role,
    pub points: Vec<MinutiaPoint>,
}

impl FingerprintTemplate {
    pub fn new(label: Label, role: Role, points: Vec<MinutiaPoint>) -> Result<Self> {
        let t = Self { label, role, points };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        ensure((MIN_POINTS..=MAX_POINTS).contains(&self.points.len()), || {
            format!(
                "template {} has {} points, expected {MIN_POINTS}..={MAX_POINTS}",
                self.label,
                self.points.len()
            )
        })?;
        self.points.iter().try_for_each(MinutiaPoint::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan {
    pub points: Vec<MinutiaPoint>,
    pub live: bool,
    pub claimed_source: Label,
}

impl Scan {
    pub fn validate(&self) -> Result<()> {
        ensure(self.points.len() <= MAX_POINTS, || {
            format!("scan has {} points, at most {MAX_POINTS} allowed", self.points.len())
        })?;
        self.points.iter().try_for_each(MinutiaPoint::validate)
    }
}

/// Enrolled templates, serialized as a bare JSON array.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateStore {
    templates: Vec<FingerprintTemplate>,
}

impl TemplateStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_templates(templates: Vec<FingerprintTemplate>) -> Result<Self> {
        let mut store = Self::new();
        for t in templates {
            store.insert(t)?;
        }
        Ok(store)
    }

    pub fn enroll(&mut self, points: Vec<MinutiaPoint>, label: Label, role: Role) -> Result<&FingerprintTemplate> {
        self.insert(FingerprintTemplate::new(label, role, points)?)
    }

    fn insert(&mut self, template: FingerprintTemplate) -> Result<&FingerprintTemplate> {
        template.validate()?;
        if self.get(template.label).is_some() {
            return Err(Error::Conflict(format!("label {} is already enrolled", template.label)));
        }
        self.templates.push(template);
        Ok(self.templates.last().expect("just pushed"))
    }

    /// Re-checks invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.templates {
            t.validate()?;
            if !seen.insert(t.label) {
                return Err(Error::Conflict(format!("label {} appears twice", t.label)));
            }
        }
        Ok(())
    }

    pub fn get(&self, label: Label) -> Option<&FingerprintTemplate> {
        self.templates.iter().find(|t| t.label == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FingerprintTemplate> {
        self.templates.iter()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureSettings {
    pub noise_stddev: f64,
    pub dropout_probability: f64,
}

impl Default for CaptureSettings {
    fn default() -> Self {
        Self { noise_stddev: 0.015, dropout_probability: 0.05 }
    }
}

impl CaptureSettings {
    pub fn validate(&self) -> Result<()> {
        ensure(self.noise_stddev.is_finite() && self.noise_stddev >= 0.0, || {
            format!("noise_stddev must be >= 0, got {}", self.noise_stddev)
        })?;
        ensure((0.0..=1.0).contains(&self.dropout_probability), || {
            format!("dropout_probability must lie in [0, 1], got {}", self.dropout_probability)
        })
    }
}

/// Simulated sensor read of `template`.
pub fn capture(template: &FingerprintTemplate, settings: CaptureSettings, live: bool, seed: u64) -> Result<Scan> {
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let position = Normal::new(0.0, settings.noise_stddev).map_err(|e| validation(e.to_string()))?;
    let turn = Normal::new(0.0, settings.noise_stddev * ORIENTATION_NOISE_PER_UNIT)
        .map_err(|e| validation(e.to_string()))?;
    let mut points = Vec::with_capacity(template.points.len());
    for p in &template.points {
        if rng.random_bool(settings.dropout_probability) {
            continue;
        }
        let dx = position.sample(&mut rng);
        let dy = position.sample(&mut rng);
        let dt: f64 = turn.sample(&mut rng);
        let dt = dt.clamp(-MAX_ORIENTATION_JITTER, MAX_ORIENTATION_JITTER);
        let mut orientation = (p.orientation + dt).rem_euclid(360.0);
        if orientation >= 360.0 {
            orientation = 0.0;
        }
        points.push(MinutiaPoint {
            x: (p.x + dx).clamp(0.0, 1.0),
            y: (p.y + dy).clamp(0.0, 1.0),
            orientation,
            kind: p.kind,
        });
    }
    Ok(Scan { points, live, claimed_source: template.label })
}

/// Random template with `count` points drawn uniformly over the unit square.
pub fn synthetic_points<R: Rng>(rng: &mut R, count: usize) -> Vec<MinutiaPoint> {
    (0..count)
        .map(|_| MinutiaPoint {
            x: rng.random_range(0.0..=1.0),
            y: rng.random_range(0.0..=1.0),
            orientation: rng.random_range(0.0..360.0),
            kind: if rng.random_bool(0.5) { MinutiaKind::RidgeEnding } else { MinutiaKind::Bifurcation },
        })
        .collect()
}

pub const SYNTHETIC_POINTS: usize = 20;

/// Store with one template per Table-2 row: A and B (two fingers of the
/// authorized holder), C, D and E.
pub fn synthetic_store(seed: u64) -> TemplateStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = [
        ('A', Role::AuthorizedWithPermission),
        ('B', Role::AuthorizedWithPermission),
        ('C', Role::AuthorizedWithoutPermission),
        ('D', Role::Unauthorized),
        ('E', Role::UnauthorizedFlagged),
    ];
    let mut store = TemplateStore::new();
    for (c, role) in rows {
        let points = synthetic_points(&mut rng, SYNTHETIC_POINTS);
        store
            .enroll(points, Label::new(c).expect("letter"), role)
            .expect("synthetic template is valid");
    }
    store
}

/// Greedy nearest-first one-to-one pairing.
///
/// Candidate pairs within both tolerances are taken in order of increasing
/// distance; each point is used at most once. The score is the number of
/// pairs over the larger of the two point counts.
pub fn match_score(scan: &Scan, template: &FingerprintTemplate) -> Result<f64> {
    if template.points.is_empty() {
        return Err(validation(format!("template {} has no points", template.label)));
    }
    if scan.points.is_empty() {
        return Ok(0.0);
    }
    Ok(matched_pairs(&scan.points, &template.points) as f64
        / scan.points.len().max(template.points.len()) as f64)
}

pub(crate) fn matched_pairs(probe: &[MinutiaPoint], gallery: &[MinutiaPoint]) -> usize {
    let mut candidates: Vec<(f64, f64, usize, usize)> = Vec::new();
    for (i, p) in probe.iter().enumerate() {
        for (j, g) in gallery.iter().enumerate() {
            let d = p.distance(g);
            let a = p.angle_gap(g);
            if d <= MATCH_DISTANCE && a <= MATCH_ANGLE {
                candidates.push((d, a, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let mut probe_used = vec![false; probe.len()];
    let mut gallery_used = vec![false; gallery.len()];
    let mut pairs = 0;
    for (_, _, i, j) in candidates {
        if !probe_used[i] && !gallery_used[j] {
            probe_used[i] = true;
            gallery_used[j] = true;
            pairs += 1;
        }
    }
    pairs
}

fn check_threshold(threshold: f64) -> Result<()> {
    ensure((0.0..=1.0).contains(&threshold), || format!("threshold must lie in [0, 1], got {threshold}"))
}

/// Liveness first, then score. A replica never verifies.
pub fn verify(scan: &Scan, template: &FingerprintTemplate, threshold: f64) -> Result<bool> {
    check_threshold(threshold)?;
    let score = match_score(scan, template)?;
    Ok(scan.live && score >= threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub far: f64,
    pub frr: f64,
}

/// Scores of every genuine and impostor comparison for a store, computed once
/// so that several thresholds can be evaluated over the same captures.
#[derive(Debug, Clone)]
pub struct ScoreSet {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

impl ScoreSet {
    pub fn collect(store: &TemplateStore, settings: CaptureSettings, trials_per_pair: u32, seed: u64) -> Result<Self> {
        ensure(store.len() >= 2, || format!("need at least 2 templates, store has {}", store.len()))?;
        ensure(trials_per_pair >= 1, || "trials_per_pair must be >= 1".into())?;
        settings.validate()?;
        let templates: Vec<_> = store.iter().collect();
        let mut genuine = Vec::new();
        let mut impostor = Vec::new();
        for (x, source) in templates.iter().enumerate() {
            for trial in 0..trials_per_pair {
                let scan = capture(source, settings, true, capture_seed(seed, x, trial))?;
                for (y, target) in templates.iter().enumerate() {
                    let score = match_score(&scan, target)?;
                    if x == y {
                        genuine.push(score);
                    } else {
                        impostor.push(score);
                    }
                }
            }
        }
        Ok(Self { genuine, impostor })
    }

    pub fn rates(&self, threshold: f64) -> Result<ErrorRates> {
        check_threshold(threshold)?;
        let accepted = self.impostor.iter().filter(|&&s| s >= threshold).count();
        let rejected = self.genuine.iter().filter(|&&s| s < threshold).count();
        Ok(ErrorRates {
            far: accepted as f64 / self.impostor.len() as f64,
            frr: rejected as f64 / self.genuine.len() as f64,
        })
    }
}

fn capture_seed(seed: u64, template_index: usize, trial: u32) -> u64 {
    derive_seed(derive_seed(seed, template_index as u64), u64::from(trial))
}

/// False accept / false reject rates over live captures. Each template is
/// captured `trials_per_pair` times; every capture is compared against its own
/// template (genuine) and against every other template (impostor).
pub fn far_frr(
    store: &TemplateStore,
    threshold: f64,
    trials_per_pair: u32,
    seed: u64,
    settings: CaptureSettings,
) -> Result<ErrorRates> {
    check_threshold(threshold)?;
    ScoreSet::collect(store, settings, trials_per_pair, seed)?.rates(threshold)
}
