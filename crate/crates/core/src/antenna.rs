//! Rectangular spiral card antenna: layout, inductance, tuning and a lumped
//! reflection estimate.
//!
//! All geometry is in millimetres; electrical outputs are SI. The spiral is
//! walked along the trace centreline starting at the outer corner, going
//! right, up, left, down, with the closing side of every turn stopping one
//! pitch (`trace_width + spacing`) short so the next turn starts inside.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, validation, Result};

/// Vacuum permeability, H/m.
pub const MU0: f64 = 4.0e-7 * PI;
/// DC resistivity of copper, ohm metre.
pub const COPPER_RESISTIVITY: f64 = 1.68e-8;
/// ISO 14443 carrier.
pub const CARRIER_FREQUENCY_HZ: f64 = 13.56e6;
/// Full-wave S11 published for the fabricated card antenna. Kept for side by
/// side display; the lumped model here does not try to reproduce it.
pub const REFERENCE_S11_DB: f64 = -2.730712;
pub const REFLECTION_FLOOR_DB: f64 = -100.0;
pub const DEFAULT_REFERENCE_IMPEDANCE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaGeometry {
    pub outer_length: f64,
    pub outer_width: f64,
    pub trace_width: f64,
    pub spacing: f64,
    pub turns: u32,
    pub trace_thickness: f64,
    pub substrate_thickness: f64,
    pub substrate_relative_permittivity: f64,
}

impl AntennaGeometry {
    /// The 54 x 33 mm, 7-turn copper spiral on 1.6 mm FR4 used on the card.
    pub fn card_reference() -> Self {
        Self {
            outer_length: 54.0,
            outer_width: 33.0,
            trace_width: 0.5,
            spacing: 1.0,
            turns: 7,
            trace_thickness: 0.035,
            substrate_thickness: 1.6,
            substrate_relative_permittivity: 4.55,
        }
    }

    pub fn pitch(&self) -> f64 {
        self.trace_width + self.spacing
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.turns >= 1, || "turns must be at least 1".into())?;
        let dims = [
            ("outer_length", self.outer_length),
            ("outer_width", self.outer_width),
            ("trace_width", self.trace_width),
            ("spacing", self.spacing),
            ("trace_thickness", self.trace_thickness),
            ("substrate_thickness", self.substrate_thickness),
            ("substrate_relative_permittivity", self.substrate_relative_permittivity),
        ];
        for (name, v) in dims {
            ensure(v.is_finite() && v > 0.0, || format!("{name} must be > 0, got {v}"))?;
        }
        let footprint = self.pitch() * f64::from(self.turns) * 2.0;
        let short_side = self.outer_length.min(self.outer_width);
        ensure(footprint < short_side, || {
            format!("spiral needs {footprint} mm but the short side is only {short_side} mm")
        })
    }
}

/// Straight conductor piece between two points (millimetres).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

impl Segment {
    pub fn new(start: (f64, f64), end: (f64, f64)) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        (self.end.0 - self.start.0).hypot(self.end.1 - self.start.1)
    }

    fn is_horizontal(&self) -> bool {
        self.start.1 == self.end.1
    }
}

pub fn spiral_segments(g: &AntennaGeometry) -> Result<Vec<Segment>> {
    g.validate()?;
    let p = g.pitch();
    let half = g.trace_width / 2.0;
    let (mut left, mut bottom) = (half, half);
    let (mut right, mut top) = (g.outer_length - half, g.outer_width - half);
    let mut at = (left, bottom);
    let mut segments = Vec::with_capacity(4 * g.turns as usize);
    for _ in 0..g.turns {
        let corners = [(right, at.1), (right, top), (left, top), (left, bottom + p)];
        for c in corners {
            segments.push(Segment::new(at, c));
            at = c;
        }
        left += p;
        bottom += p;
        right -= p;
        top -= p;
    }
    Ok(segments)
}

/// Total centreline length of the spiral in millimetres.
pub fn trace_length(g: &AntennaGeometry) -> Result<f64> {
    Ok(spiral_segments(g)?.iter().map(Segment::length).sum())
}

/// Self-inductance of a straight rectangular-section conductor (henries).
pub fn segment_self_inductance(length_mm: f64, width_mm: f64, thickness_mm: f64) -> f64 {
    let l = length_mm * 1e-3;
    let wt = (width_mm + thickness_mm) * 1e-3;
    2e-7 * l * ((2.0 * l / wt).ln() + 0.50049 + wt / (3.0 * l))
}

/// Mutual inductance between two axis-aligned filaments (henries). Signed:
/// positive when currents flow the same way, zero for perpendicular pieces.
pub fn filament_mutual_inductance(a: &Segment, b: &Segment) -> f64 {
    if a.is_horizontal() != b.is_horizontal() {
        return 0.0;
    }
    type Axis = fn((f64, f64)) -> f64;
    let (along, across): (Axis, Axis) = if a.is_horizontal() {
        (|p| p.0, |p| p.1)
    } else {
        (|p| p.1, |p| p.0)
    };
    let d = (across(a.start) - across(b.start)).abs() * 1e-3;
    let span = |s: &Segment| {
        let (u, v) = (along(s.start) * 1e-3, along(s.end) * 1e-3);
        (u.min(v), u.max(v), v >= u)
    };
    let (x1, x2, a_fwd) = span(a);
    let (x3, x4, b_fwd) = span(b);
    // Antiderivative of the Neumann kernel 1/sqrt(u^2 + d^2), integrated twice.
    let f = |u: f64| {
        if d == 0.0 {
            if u == 0.0 {
                0.0
            } else {
                u.abs() * u.abs().ln() - u.abs()
            }
        } else {
            u * (u / d).asinh() - u.hypot(d)
        }
    };
    let m = 1e-7 * (f(x2 - x3) - f(x1 - x3) - f(x2 - x4) + f(x1 - x4));
    if a_fwd == b_fwd {
        m
    } else {
        -m
    }
}

/// Greenhouse summation: every self term plus every signed mutual pair.
pub fn greenhouse_sum(segments: &[Segment], width_mm: f64, thickness_mm: f64) -> f64 {
    let own: f64 = segments
        .iter()
        .map(|s| segment_self_inductance(s.length(), width_mm, thickness_mm))
        .sum();
    let mut mutual = 0.0;
    for (i, a) in segments.iter().enumerate() {
        for b in &segments[i + 1..] {
            mutual += filament_mutual_inductance(a, b);
        }
    }
    own + 2.0 * mutual
}

pub fn inductance_greenhouse(g: &AntennaGeometry) -> Result<f64> {
    let segments = spiral_segments(g)?;
    Ok(greenhouse_sum(&segments, g.trace_width, g.trace_thickness))
}

/// Closed-form current-sheet estimate, treating the rectangle as a square
/// whose side is the mean of the two outer sides.
pub fn inductance_wheeler(g: &AntennaGeometry) -> Result<f64> {
    g.validate()?;
    const C1: f64 = 1.27;
    const C2: f64 = 2.07;
    const C3: f64 = 0.18;
    const C4: f64 = 0.13;
    let n = f64::from(g.turns);
    let d_out = (g.outer_length + g.outer_width) / 2.0 * 1e-3;
    let d_in = d_out - (2.0 * n * g.trace_width + 2.0 * (n - 1.0) * g.spacing) * 1e-3;
    let d_avg = (d_out + d_in) / 2.0;
    let fill = (d_out - d_in) / (d_out + d_in);
    Ok(MU0 * n * n * d_avg * C1 / 2.0 * ((C2 / fill).ln() + C3 * fill + C4 * fill * fill))
}

fn positive(name: &str, v: f64) -> Result<()> {
    ensure(v.is_finite() && v > 0.0, || format!("{name} must be > 0, got {v}"))
}

/// Capacitance resonating with `inductance` at `target_frequency`.
pub fn tuning_capacitance(inductance: f64, target_frequency: f64) -> Result<f64> {
    positive("inductance", inductance)?;
    positive("target_frequency", target_frequency)?;
    let omega = 2.0 * PI * target_frequency;
    Ok(1.0 / (omega * omega * inductance))
}

pub fn resonant_frequency(inductance: f64, capacitance: f64) -> Result<f64> {
    positive("inductance", inductance)?;
    positive("capacitance", capacitance)?;
    Ok(1.0 / (2.0 * PI * (inductance * capacitance).sqrt()))
}

/// DC resistance of the spiral trace in ohms (skin effect ignored).
pub fn trace_resistance(g: &AntennaGeometry) -> Result<f64> {
    let length = trace_length(g)? * 1e-3;
    let area = g.trace_width * 1e-3 * g.trace_thickness * 1e-3;
    Ok(COPPER_RESISTIVITY * length / area)
}

/// |S11| in dB of a series RLC seen from a port of `reference_impedance`.
pub fn reflection_estimate(
    inductance: f64,
    capacitance: f64,
    series_resistance: f64,
    frequency: f64,
    reference_impedance: f64,
) -> Result<f64> {
    positive("inductance", inductance)?;
    positive("capacitance", capacitance)?;
    positive("series_resistance", series_resistance)?;
    positive("frequency", frequency)?;
    positive("reference_impedance", reference_impedance)?;
    let omega = 2.0 * PI * frequency;
    let z = Complex64::new(series_resistance, omega * inductance - 1.0 / (omega * capacitance));
    let z0 = Complex64::new(reference_impedance, 0.0);
    let gamma = ((z - z0) / (z + z0)).norm();
    if gamma == 0.0 {
        return Ok(REFLECTION_FLOOR_DB);
    }
    // |gamma| can round a hair above 1 in the open-circuit limit.
    Ok((20.0 * gamma.log10()).clamp(REFLECTION_FLOOR_DB, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaReport {
    /// Greenhouse value, henries.
    pub inductance: f64,
    pub inductance_wheeler: f64,
    /// Relative gap between the two inductance figures.
    pub inductance_relative_gap: f64,
    pub tuning_capacitance: f64,
    pub resonant_frequency: f64,
    pub trace_resistance: f64,
    pub reflection_coefficient_db: f64,
    pub reference_s11_db: f64,
    pub trace_length: f64,
}

pub fn analyze(g: &AntennaGeometry, target_frequency: f64, reference_impedance: f64) -> Result<AntennaReport> {
    let inductance = inductance_greenhouse(g)?;
    let wheeler = inductance_wheeler(g)?;
    let tuning = tuning_capacitance(inductance, target_frequency)?;
    let resistance = trace_resistance(g)?;
    let reflection =
        reflection_estimate(inductance, tuning, resistance, target_frequency, reference_impedance)?;
    if !(inductance > 0.0 && wheeler > 0.0) {
        return Err(validation("geometry produced a non-positive inductance"));
    }
    Ok(AntennaReport {
        inductance,
        inductance_wheeler: wheeler,
        inductance_relative_gap: (wheeler - inductance).abs() / inductance,
        tuning_capacitance: tuning,
        resonant_frequency: resonant_frequency(inductance, tuning)?,
        trace_resistance: resistance,
        reflection_coefficient_db: reflection,
        reference_s11_db: REFERENCE_S11_DB,
        trace_length: trace_length(g)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn coil(length: f64, width: f64, w: f64, s: f64, turns: u32) -> AntennaGeometry {
        AntennaGeometry {
            outer_length: length,
            outer_width: width,
            trace_width: w,
            spacing: s,
            turns,
            ..AntennaGeometry::card_reference()
        }
    }

    // Frozen from an independent coordinate-walk script.
    #[test]
    fn trace_length_single_turn() {
        let g = coil(10.0, 10.0, 0.5, 0.5, 1);
        assert!((trace_length(&g).unwrap() - 37.0).abs() < 1e-12);
    }

    #[test]
    fn trace_length_card_reference() {
        let l = trace_length(&AntennaGeometry::card_reference()).unwrap();
        assert!((l - 950.5).abs() < 1e-9, "{l}");
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(trace_length(&coil(10.0, 10.0, 0.5, 0.5, 0)).is_err());
        assert!(trace_length(&coil(10.0, 10.0, -0.5, 0.5, 1)).is_err());
        // 2 * 1.5 * 7 = 21 mm does not fit a 20 mm side
        assert!(inductance_greenhouse(&coil(54.0, 20.0, 0.5, 1.0, 7)).is_err());
        assert!(inductance_wheeler(&coil(54.0, 20.0, 0.5, 1.0, 7)).is_err());
    }

    #[test]
    fn spiral_closes_one_pitch_short() {
        let segs = spiral_segments(&coil(20.0, 10.0, 0.5, 0.5, 2)).unwrap();
        assert_eq!(segs.len(), 8);
        for pair in segs.windows(2) {
            assert_eq!(pair[0].end, pair[1].start);
        }
        assert_eq!(segs[3].end, (0.25, 1.25));
        assert_eq!(segs[4].start, (0.25, 1.25));
        assert_eq!(segs[7].end, (1.25, 2.25));
    }

    #[test]
    fn one_segment_is_self_term() {
        let s = [Segment::new((0.0, 0.0), (10.0, 0.0))];
        let l = greenhouse_sum(&s, 0.5, 0.035);
        // closed form evaluated independently
        assert!(rel(l, 8.279088277946909e-09) < 1e-12, "{l}");
    }

    #[test]
    fn opposite_currents_reduce_total() {
        let a = Segment::new((0.0, 0.0), (10.0, 0.0));
        let b = Segment::new((10.0, 1.0), (0.0, 1.0));
        let own = 2.0 * segment_self_inductance(10.0, 0.5, 0.035);
        assert!(greenhouse_sum(&[a, b], 0.5, 0.035) < own);
        let b_same = Segment::new((0.0, 1.0), (10.0, 1.0));
        assert!(greenhouse_sum(&[a, b_same], 0.5, 0.035) > own);
    }

    #[test]
    fn perpendicular_pieces_do_not_couple() {
        let a = Segment::new((0.0, 0.0), (10.0, 0.0));
        let b = Segment::new((10.0, 0.0), (10.0, 5.0));
        assert_eq!(filament_mutual_inductance(&a, &b), 0.0);
    }

    /// Midpoint-rule Neumann integral, independent of the closed form.
    fn neumann_quadrature(a: &Segment, b: &Segment, steps: usize) -> f64 {
        let pa = |t: f64| (a.start.0 + (a.end.0 - a.start.0) * t, a.start.1 + (a.end.1 - a.start.1) * t);
        let pb = |t: f64| (b.start.0 + (b.end.0 - b.start.0) * t, b.start.1 + (b.end.1 - b.start.1) * t);
        let da = ((a.end.0 - a.start.0) * 1e-3, (a.end.1 - a.start.1) * 1e-3);
        let db = ((b.end.0 - b.start.0) * 1e-3, (b.end.1 - b.start.1) * 1e-3);
        let dot = da.0 * db.0 + da.1 * db.1;
        let h = 1.0 / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            let p = pa((i as f64 + 0.5) * h);
            for j in 0..steps {
                let q = pb((j as f64 + 0.5) * h);
                let r = (p.0 - q.0).hypot(p.1 - q.1) * 1e-3;
                acc += 1.0 / r;
            }
        }
        1e-7 * dot * acc * h * h
    }

    #[test]
    fn mutual_matches_quadrature() {
        let cases = [
            (Segment::new((0.0, 0.0), (10.0, 0.0)), Segment::new((3.0, 1.5), (12.0, 1.5))),
            (Segment::new((0.0, 0.0), (20.0, 0.0)), Segment::new((18.0, 4.0), (2.0, 4.0))),
            (Segment::new((0.0, 0.0), (0.0, 8.0)), Segment::new((5.0, 9.0), (5.0, 20.0))),
        ];
        for (a, b) in cases {
            let closed = filament_mutual_inductance(&a, &b);
            let quad = neumann_quadrature(&a, &b, 1500);
            assert!(rel(closed, quad) < 1e-4, "{closed} vs {quad}");
        }
    }

    #[test]
    fn collinear_pieces_are_finite() {
        let a = Segment::new((0.0, 0.0), (5.0, 0.0));
        let b = Segment::new((6.0, 0.0), (10.0, 0.0));
        let m = filament_mutual_inductance(&a, &b);
        let quad = neumann_quadrature(&a, &b, 1500);
        assert!(m.is_finite() && m > 0.0);
        assert!(rel(m, quad) < 1e-3, "{m} vs {quad}");
    }

    // Frozen from a Gauss-Legendre quadrature of every segment pair.
    #[test]
    fn card_reference_greenhouse_regression() {
        let l = inductance_greenhouse(&AntennaGeometry::card_reference()).unwrap();
        assert!(rel(l, 2.640237284191475e-06) < 1e-9, "{l}");
    }

    #[test]
    fn card_reference_wheeler_within_ten_percent() {
        let g = AntennaGeometry::card_reference();
        let wh = inductance_wheeler(&g).unwrap();
        assert!(rel(wh, 2.7426512473006314e-06) < 1e-9, "{wh}");
        assert!(rel(wh, inductance_greenhouse(&g).unwrap()) <= 0.10);
    }

    #[test]
    fn wheeler_grows_with_turns() {
        let few = inductance_wheeler(&coil(54.0, 33.0, 0.5, 1.0, 3)).unwrap();
        let many = inductance_wheeler(&coil(54.0, 33.0, 0.5, 1.0, 6)).unwrap();
        assert!(many > few);
    }

    #[test]
    fn wheeler_thin_single_turn_is_small_and_finite() {
        let l = inductance_wheeler(&coil(40.0, 40.0, 0.05, 0.05, 1)).unwrap();
        assert!(l.is_finite() && l > 0.0 && l < 1e-6, "{l}");
        // evaluated numerically beside the formula for rho = 0.00125
        assert!(rel(l, 2.3625722554689862e-07) < 1e-6, "{l}");
    }

    #[test]
    fn tuning_for_one_microhenry() {
        let c = tuning_capacitance(1e-6, CARRIER_FREQUENCY_HZ).unwrap();
        assert!(rel(c, 1.377592863281322e-10) < 1e-12);
        let f = resonant_frequency(1e-6, c).unwrap();
        assert!(rel(f, CARRIER_FREQUENCY_HZ) < 1e-9);
        let halved = tuning_capacitance(2e-6, CARRIER_FREQUENCY_HZ).unwrap();
        assert!(rel(halved, c / 2.0) < 1e-12);
    }

    #[test]
    fn tuning_rejects_non_positive() {
        assert!(tuning_capacitance(0.0, 1.0).is_err());
        assert!(tuning_capacitance(1.0, -1.0).is_err());
    }

    #[test]
    fn perfect_match_hits_floor() {
        let l = 1e-6;
        let c = tuning_capacitance(l, CARRIER_FREQUENCY_HZ).unwrap();
        let db = reflection_estimate(l, c, 50.0, CARRIER_FREQUENCY_HZ, 50.0).unwrap();
        assert!(db <= -60.0, "{db}");
        assert!(db >= REFLECTION_FLOOR_DB);
        // exactly representable resonance
        let db = reflection_estimate(1.0, 1.0, 50.0, 1.0 / (2.0 * PI), 50.0).unwrap();
        assert_eq!(db, REFLECTION_FLOOR_DB);
    }

    #[test]
    fn open_circuit_reflects_everything() {
        let db = reflection_estimate(1e-6, 1e-10, 1e12, CARRIER_FREQUENCY_HZ, 50.0).unwrap();
        assert!(db > -1e-6 && db <= 0.0, "{db}");
    }

    #[test]
    fn reflection_rejects_non_positive() {
        assert!(reflection_estimate(1e-6, 1e-10, 0.0, CARRIER_FREQUENCY_HZ, 50.0).is_err());
    }

    #[test]
    fn card_report() {
        let r = analyze(&AntennaGeometry::card_reference(), CARRIER_FREQUENCY_HZ, 50.0).unwrap();
        assert!(r.reflection_coefficient_db < 0.0 && r.reflection_coefficient_db.is_finite());
        assert!(rel(r.resonant_frequency, CARRIER_FREQUENCY_HZ) < 1e-9);
        assert!(r.inductance_relative_gap <= 0.10);
        assert_eq!(r.reference_s11_db, -2.730712);
        // copper: 1.68e-8 * 0.9505 / (0.5e-3 * 0.035e-3)
        assert!(rel(r.trace_resistance, 0.912_48) < 1e-4, "{}", r.trace_resistance);
    }

    #[test]
    fn geometry_json_field_names() {
        let json = r#"{"outer_length":54,"outer_width":33,"trace_width":0.5,"spacing":1,
            "turns":7,"trace_thickness":0.035,"substrate_thickness":1.6,
            "substrate_relative_permittivity":4.55}"#;
        let g: AntennaGeometry = serde_json::from_str(json).unwrap();
        assert_eq!(g, AntennaGeometry::card_reference());
    }
}
