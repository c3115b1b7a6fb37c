//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Tolerances are fixed here and nowhere else.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use biothentic_core::antenna::{
    analyze, inductance_greenhouse, inductance_wheeler, resonant_frequency, tuning_capacitance, AntennaGeometry,
    CARRIER_FREQUENCY_HZ, DEFAULT_REFERENCE_IMPEDANCE,
};
use biothentic_core::channel::LinkConditions;
use biothentic_core::fingerprint::{
    capture, far_frr, match_score, CaptureSettings, FingerprintTemplate, Label, MinutiaKind, MinutiaPoint, Role,
    MATCH_ANGLE, MATCH_DISTANCE,
};
use biothentic_core::firmware::{Card, CardConfig, Indicator, Mode};
use biothentic_core::gate::{communication_process, CommunicationGate};
use biothentic_core::harness::{default_suite, run_scenario, run_suite, AttackScenario, InjectionParams, SuiteEntry, Sweep, SweepParams, Verdict};
use biothentic_core::reader::{Permission, Reader, Transponder};
use biothentic_core::sim::{Environment, World};
use biothentic_core::trace::EventKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GATE_RUNTIME: Duration = Duration::from_secs(1);
const ANTENNA_RUNTIME: Duration = Duration::from_secs(5);
const SUITE_RUNTIME: Duration = Duration::from_secs(60);
const WHEELER_TOLERANCE: f64 = 0.10;
const ROUND_TRIP_TOLERANCE: f64 = 1e-9;
const GREEDY_TOLERANCE: f64 = 0.05;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn label(c: char) -> Label {
    Label::new(c).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gate_law() -> Check {
    let start = Instant::now();
    let card = Card::new(CardConfig::default()).map_err(|e| e.to_string())?;
    let reader = Reader::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut absent = 0;
    for _ in 0..1000 {
        let link = LinkConditions::new(rng.random_range(0.0..=150.0), rng.random_range(0.0..=90.0));
        let r = reader.interrogate(&card, link, card.gate_value(), 0).map_err(|e| e.to_string())?;
        if r.uid.is_none() && r.responses == 0 {
            absent += 1;
        }
    }
    ensure(absent == 1000, || format!("{absent}/1000 open-joint interrogations absent"))?;

    let mut cases = 0;
    for tags in 1..=2usize {
        for joints in 1..=3usize {
            let bits = tags + tags * joints;
            for mask in 0u32..(1 << bits) {
                let bit = |i: usize| ((mask >> i) & 1) as u8;
                let tag_present: Vec<u8> = (0..tags).map(bit).collect();
                let matrix: Vec<Vec<u8>> =
                    (0..tags).map(|i| (0..joints).map(|j| bit(tags + i * joints + j)).collect()).collect();
                let mut expected = 0u64;
                for (r, row) in tag_present.iter().zip(&matrix) {
                    for a in row {
                        expected += u64::from(*r) * u64::from(*a);
                    }
                }
                let got = communication_process(&CommunicationGate { tag_present, joints: matrix }).map_err(|e| e.to_string())?;
                ensure(got == expected, || format!("gate mask {mask:#b}: {got} != {expected}"))?;
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < GATE_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!("1000/1000 absent, {cases} gate matrices exact, {elapsed:.0?}"))
}

fn authorized_flow() -> Check {
    let mut good = 0;
    for seed in 0..100u64 {
        let env = Environment::synthetic(seed);
        let mut world = World::new(&env, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let link = LinkConditions::new(rng.random_range(0.0..=40.0), rng.random_range(0.0..=30.0));
        world.scan(label('A'), true).map_err(|e| e.to_string())?;
        world.scan(label('B'), true).map_err(|e| e.to_string())?;
        let (r, decision) = world.interrogate(link).map_err(|e| e.to_string())?;
        let s = world.card().state();
        if s.joint_closed && s.indicator == Indicator::Green && r.uid.as_ref() == Some(&env.card.uid) && decision == Permission::Granted {
            good += 1;
        }
    }
    ensure(good == 100, || format!("{good}/100 granted"))?;
    Ok("100/100 closed, green, uid delivered, granted".into())
}

fn role_mapping() -> Check {
    let expected = [('C', Indicator::Yellow, Mode::Shielded), ('D', Indicator::Blue, Mode::Shielded), ('E', Indicator::Red, Mode::Alarm)];
    for (c, indicator, mode) in expected {
        let mut hits = 0;
        for seed in 0..100u64 {
            let env = Environment::synthetic(seed);
            let mut world = World::new(&env, seed).map_err(|e| e.to_string())?;
            world.scan(label(c), true).map_err(|e| e.to_string())?;
            let s = world.card().state().clone();
            let (_, decision) = world.interrogate(LinkConditions::new(10.0, 0.0)).map_err(|e| e.to_string())?;
            let alarm_raised = world.trace().iter().any(|e| e.kind == EventKind::Alarm);
            if s.indicator == indicator && s.mode == mode && decision == Permission::Denied && alarm_raised == (mode == Mode::Alarm) {
                hits += 1;
            }
        }
        ensure(hits == 100, || format!("{c}: {hits}/100"))?;
    }
    Ok("C yellow/denied, D blue/denied, E red/alarm: 100/100 each".into())
}

fn forgery_rejection() -> Check {
    let perfect = CaptureSettings { noise_stddev: 0.0, dropout_probability: 0.0 };
    let mut grants = 0;
    let mut closures = 0;
    for seed in 0..100u64 {
        let env = Environment::synthetic(seed);
        let mut world = World::new(&env, seed).map_err(|e| e.to_string())?;
        world.scan_with(label('A'), false, perfect).map_err(|e| e.to_string())?;
        world.scan_with(label('B'), false, perfect).map_err(|e| e.to_string())?;
        let (_, decision) = world.interrogate(LinkConditions::new(5.0, 0.0)).map_err(|e| e.to_string())?;
        grants += u32::from(decision == Permission::Granted);
        closures += world.trace().iter().filter(|e| e.kind == EventKind::JointClosed).count();
    }
    ensure(grants == 0 && closures == 0, || format!("{grants} grants, {closures} joint closures"))?;
    Ok("0 grants, 0 closures over 100 seeds".into())
}

fn tamper() -> Check {
    let env = Environment::synthetic(5);
    let sweep = Sweep::default();
    let bridge = run_scenario(&SuiteEntry::new(AttackScenario::ClipBridgeCable(SweepParams { sweep })), &env, 5).map_err(|e| e.to_string())?;
    ensure(bridge.responses_observed == 0, || format!("cable bridge: {} responses", bridge.responses_observed))?;

    let inject = run_scenario(&SuiteEntry::new(AttackScenario::ClipInject5v(InjectionParams::default())), &env, 5).map_err(|e| e.to_string())?;
    let alarm = inject.trace.iter().any(|e| e.kind == EventKind::Alarm);
    ensure(alarm && inject.uids_delivered == 0, || format!("injection: alarm {alarm}, {} uids", inject.uids_delivered))?;

    let out = biothentic_cli::run(["btc", "attack", "--config", data("config.json").to_str().unwrap(), data("suite_whatif.json").to_str().unwrap()]);
    let flagged = out.stdout.lines().any(|l| l.contains("clip_inject_5v") && l.contains("MISMATCH"));
    ensure(out.code == 1 && flagged, || format!("what-if attack exit {} flagged {flagged}", out.code))?;
    Ok(format!("bridge 0/{} responses, injection alarm with 0 uids, what-if exits 1", sweep.links().len()))
}

fn random_geometry(rng: &mut ChaCha8Rng) -> AntennaGeometry {
    let turns = rng.random_range(2..=10u32);
    let short = rng.random_range(20.0..=60.0);
    let aspect: f64 = rng.random_range(0.6..=1.0);
    let long = short / aspect;
    let fill = rng.random_range(0.2..=0.7);
    let pitch = fill * short / (2.0 * turns as f64);
    let width_share = rng.random_range(0.3..=0.7);
    AntennaGeometry {
        outer_length: long,
        outer_width: short,
        trace_width: pitch * width_share,
        spacing: pitch * (1.0 - width_share),
        turns,
        ..AntennaGeometry::card_reference()
    }
}

fn antenna_numerics() -> Check {
    let start = Instant::now();
    let card = AntennaGeometry::card_reference();
    let r = analyze(&card, CARRIER_FREQUENCY_HZ, DEFAULT_REFERENCE_IMPEDANCE).map_err(|e| e.to_string())?;
    ensure(r.inductance_relative_gap <= WHEELER_TOLERANCE, || format!("card gap {:.4}", r.inductance_relative_gap))?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let g = random_geometry(&mut rng);
        let gh = inductance_greenhouse(&g).map_err(|e| e.to_string())?;
        let wh = inductance_wheeler(&g).map_err(|e| e.to_string())?;
        let gap = ((wh - gh) / gh).abs();
        worst = worst.max(gap);
        ensure(gap <= WHEELER_TOLERANCE, || format!("{g:?}: gap {gap:.4}"))?;
    }
    let mut worst_rt: f64 = 0.0;
    for _ in 0..100 {
        let l = 10f64.powf(rng.random_range(-8.0..=-4.0));
        let f = 10f64.powf(rng.random_range(5.0..=8.0));
        let c = tuning_capacitance(l, f).map_err(|e| e.to_string())?;
        let back = resonant_frequency(l, c).map_err(|e| e.to_string())?;
        worst_rt = worst_rt.max(((back - f) / f).abs());
    }
    ensure(worst_rt <= ROUND_TRIP_TOLERANCE, || format!("round trip {worst_rt:e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < ANTENNA_RUNTIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "card gap {:.2}%, worst random gap {:.2}%, worst round trip {worst_rt:.1e}, {elapsed:.0?}",
        r.inductance_relative_gap * 100.0,
        worst * 100.0
    ))
}

fn compatible(a: &MinutiaPoint, b: &MinutiaPoint) -> bool {
    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    let gap = (a.orientation - b.orientation).rem_euclid(360.0);
    d <= MATCH_DISTANCE && gap.min(360.0 - gap) <= MATCH_ANGLE
}

/// Largest one-to-one pairing, by trying every assignment.
fn exhaustive_pairs(probe: &[MinutiaPoint], gallery: &[MinutiaPoint], used: &mut Vec<bool>) -> usize {
    let Some((p, rest)) = probe.split_first() else { return 0 };
    let mut best = exhaustive_pairs(rest, gallery, used);
    for j in 0..gallery.len() {
        if !used[j] && compatible(p, &gallery[j]) {
            used[j] = true;
            best = best.max(1 + exhaustive_pairs(rest, gallery, used));
            used[j] = false;
        }
    }
    best
}

/// Returns (worst optimum-minus-greedy gap, instances below optimum).
fn greedy_gap(seed: u64, spread: f64, settings: CaptureSettings) -> Result<(f64, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut differing = 0;
    for i in 0..200u64 {
        let n = rng.random_range(4..=8usize);
        let points: Vec<MinutiaPoint> = (0..n)
            .map(|_| MinutiaPoint {
                x: rng.random_range(0.0..=spread),
                y: rng.random_range(0.0..=spread),
                orientation: rng.random_range(0.0..360.0),
                kind: MinutiaKind::RidgeEnding,
            })
            .collect();
        let template = FingerprintTemplate::new(label('A'), Role::AuthorizedWithPermission, points).map_err(|e| e.to_string())?;
        let scan = capture(&template, settings, true, i).map_err(|e| e.to_string())?;
        let greedy = match_score(&scan, &template).map_err(|e| e.to_string())?;
        let pairs = exhaustive_pairs(&scan.points, &template.points, &mut vec![false; n]);
        let optimal = pairs as f64 / scan.points.len().max(n) as f64;
        let gap = optimal - greedy;
        ensure(gap >= -1e-12, || format!("instance {i}: greedy {greedy} above optimum {optimal}"))?;
        differing += usize::from(gap > 0.0);
        worst = worst.max(gap);
    }
    Ok((worst, differing))
}

// Templates spread over the unit square with noisy self-scans.
fn matching_optimality() -> Check {
    let (worst, differing) = greedy_gap(7, 1.0, CaptureSettings { noise_stddev: 0.01, dropout_probability: 0.0 })?;
    ensure(worst <= GREEDY_TOLERANCE, || format!("worst gap {worst:.3} ({differing}/200 instances below optimum)"))?;
    Ok(format!("worst gap {worst:.3} over 200 instances ({differing} below optimum)"))
}

// Not a criterion: all points crowded into a 0.12 patch, where greedy is
// known to fall short. Printed so the limitation stays visible.
fn crowded_matching_note() -> String {
    match greedy_gap(7, 0.12, CaptureSettings { noise_stddev: 0.03, dropout_probability: 0.1 }) {
        Ok((worst, differing)) => format!("crowded point sets: {differing}/200 below optimum, worst gap {worst:.3}"),
        Err(e) => format!("crowded point sets: {e}"),
    }
}

fn far_frr_monotonic() -> Check {
    let store = biothentic_core::fingerprint::synthetic_store(8);
    let settings = CaptureSettings { noise_stddev: 0.03, dropout_probability: 0.15 };
    let mut prev = None;
    let mut rows = Vec::new();
    for step in 0..=10 {
        let t = step as f64 / 10.0;
        let r = far_frr(&store, t, 40, 8, settings).map_err(|e| e.to_string())?;
        if let Some((pf, pr)) = prev {
            ensure(r.far <= pf && r.frr >= pr, || format!("threshold {t}: far {pf}->{} frr {pr}->{}", r.far, r.frr))?;
        }
        prev = Some((r.far, r.frr));
        rows.push(format!("{:.1}:{:.3}/{:.3}", t, r.far, r.frr));
    }
    Ok(format!("far/frr {}", rows.join(" ")))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    let config = s(data("config.json"));
    let commands: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--config".into(), config.clone(), s(data("authorized.script"))],
        vec!["simulate".into(), "--json".into(), "--config".into(), config.clone(), s(data("intruder.script"))],
        vec!["simulate".into(), "--seed".into(), "99".into(), s(data("authorized.script"))],
        vec!["attack".into(), "--config".into(), config.clone(), s(data("suite_default.json"))],
        vec!["attack".into(), "--json".into(), "--seed".into(), "4".into(), s(data("suite_whatif.json"))],
        vec!["antenna".into(), s(data("card_antenna.json"))],
        vec!["antenna".into(), "--json".into(), s(data("card_antenna.json"))],
    ];
    for cmd in &commands {
        let argv: Vec<&str> = std::iter::once("btc").chain(cmd.iter().map(String::as_str)).collect();
        let a = biothentic_cli::run(&argv);
        let b = biothentic_cli::run(&argv);
        ensure(a == b && !a.stdout.is_empty(), || format!("{cmd:?} differs between runs"))?;
    }
    // Commands that write files: compare the written bytes too.
    let mut outputs = Vec::new();
    for round in 0..2 {
        let store = dir.path().join(format!("store{round}.json"));
        let synth = dir.path().join(format!("synth{round}.json"));
        let st = s(store.clone());
        let a = biothentic_cli::run(["btc", "synthesize", "--seed", "12", "--store", synth.to_str().unwrap()]);
        let b = biothentic_cli::run(["btc", "enroll", "--store", &st, "--label", "A", "--role", "authorized_with_permission", "--points", &s(data("points/A.json"))]);
        let c = biothentic_cli::run(["btc", "enroll", "--json", "--store", &st, "--label", "C", "--role", "authorized_without_permission", "--points", &s(data("points/C.json"))]);
        ensure(a.code == 0 && b.code == 0 && c.code == 0, || format!("file commands failed: {} {} {}", a.stderr, b.stderr, c.stderr))?;
        outputs.push((
            a.stdout.replace(&format!("synth{round}"), "synth"),
            b.stdout.replace(&format!("store{round}"), "store"),
            c.stdout.replace(&format!("store{round}"), "store"),
            std::fs::read(&synth).map_err(|e| e.to_string())?,
            std::fs::read(&store).map_err(|e| e.to_string())?,
        ));
    }
    ensure(outputs[0] == outputs[1], || "enroll/synthesize output differs between runs".into())?;
    Ok(format!("{} commands byte-identical on repeat", commands.len() + 3))
}

fn countermeasure_matrix() -> Check {
    let suite = default_suite();
    for seed in 0..20u64 {
        let env = Environment::synthetic(seed);
        let report = run_suite(&suite, &env, seed).map_err(|e| e.to_string())?;
        let text = report.render_text();
        ensure(text.contains("unauthorized card use: mitigated"), || format!("seed {seed}: card use verdict {:?}", report.verdict("unauthorized card use")))?;
        ensure(text.contains("relay attack (active session): not mitigated"), || {
            format!("seed {seed}: relay verdict {:?}", report.verdict("relay attack (active session)"))
        })?;
        ensure(report.verdict("relay attack (active session)") == Some(Verdict::NotMitigated), || format!("seed {seed}"))?;
    }
    Ok("both verdicts stable over 20 seeds".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gate law", gate_law),
        ("authorized flow", authorized_flow),
        ("role mapping", role_mapping),
        ("forgery rejection", forgery_rejection),
        ("tamper", tamper),
        ("antenna numerics", antenna_numerics),
        ("matching optimality", matching_optimality),
        ("far/frr monotonicity", far_frr_monotonic),
        ("determinism", determinism),
        ("countermeasure matrix", countermeasure_matrix),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let elapsed = t.elapsed();
        match result {
            Ok(detail) => println!("acceptance {:>2} {name}: PASS ({detail}) [{elapsed:.0?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {:>2} {name}: FAIL ({detail}) [{elapsed:.0?}]", i + 1);
            }
        }
    }
    println!("note: {}", crowded_matching_note());
    let total = start.elapsed();
    if total >= SUITE_RUNTIME {
        failed += 1;
        println!("acceptance suite runtime: FAIL ({total:.1?} >= {SUITE_RUNTIME:?})");
    } else {
        println!("acceptance suite runtime: {total:.1?}");
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
