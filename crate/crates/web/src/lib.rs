//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers or a JSON string and returns JSON. The
//! `*_json` functions hold the logic and run natively in tests.

use biothentic_core::antenna::{analyze, AntennaGeometry, CARRIER_FREQUENCY_HZ, DEFAULT_REFERENCE_IMPEDANCE};
use biothentic_core::channel::{coupling_coefficient, tag_powered, ChannelConstants, LinkConditions};
use biothentic_core::fingerprint::{synthetic_store, CaptureSettings, ScoreSet};
use biothentic_core::gate::{communication_process, CommunicationGate};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_GRID: usize = 200;
const MAX_TRIALS: u32 = 200;

pub fn antenna_report_json(geometry: &str) -> Result<String, String> {
    let g: AntennaGeometry = serde_json::from_str(geometry).map_err(|e| e.to_string())?;
    let report = analyze(&g, CARRIER_FREQUENCY_HZ, DEFAULT_REFERENCE_IMPEDANCE).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct CouplingMap {
    distances: Vec<f64>,
    angles: Vec<f64>,
    /// `k[i][j]` at `distances[i]`, `angles[j]`.
    k: Vec<Vec<f64>>,
    powered: Vec<Vec<bool>>,
    gate_value: u64,
}

/// Coupling over a distance x angle grid, and whether the tag would be
/// powered with the joint open or closed.
pub fn coupling_map_json(constants: ChannelConstants, max_distance: f64, steps: usize, joint_closed: bool) -> Result<String, String> {
    constants.validate().map_err(|e| e.to_string())?;
    if !(max_distance > 0.0 && max_distance.is_finite()) || !(2..=MAX_GRID).contains(&steps) {
        return Err(format!("need max_distance > 0 and 2..={MAX_GRID} steps"));
    }
    let gate = communication_process(&CommunicationGate::single(joint_closed)).map_err(|e| e.to_string())?;
    let last = (steps - 1) as f64;
    let distances: Vec<f64> = (0..steps).map(|i| max_distance * i as f64 / last).collect();
    let angles: Vec<f64> = (0..steps).map(|j| 90.0 * j as f64 / last).collect();
    let mut k = Vec::with_capacity(steps);
    let mut powered = Vec::with_capacity(steps);
    for &d in &distances {
        let row: Vec<f64> = angles
            .iter()
            .map(|&a| coupling_coefficient(&LinkConditions::new(d, a), &constants))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        powered.push(row.iter().map(|&v| tag_powered(v, gate, constants.k_min)).collect());
        k.push(row);
    }
    serde_json::to_string(&CouplingMap { distances, angles, k, powered, gate_value: gate }).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct CurvePoint {
    threshold: f64,
    far: f64,
    frr: f64,
}

/// FAR/FRR at thresholds 0, 0.05, ..., 1 on the seeded synthetic store.
pub fn far_frr_curve_json(seed: u64, settings: CaptureSettings, trials: u32) -> Result<String, String> {
    if !(1..=MAX_TRIALS).contains(&trials) {
        return Err(format!("trials must be 1..={MAX_TRIALS}"));
    }
    let scores = ScoreSet::collect(&synthetic_store(seed), settings, trials, seed).map_err(|e| e.to_string())?;
    let curve = (0..=20)
        .map(|i| {
            let threshold = i as f64 / 20.0;
            scores.rates(threshold).map(|r| CurvePoint { threshold, far: r.far, frr: r.frr })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn antenna_report(geometry_json: &str) -> Result<String, JsValue> {
    antenna_report_json(geometry_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn coupling_map(k0: f64, d0: f64, k_min: f64, max_distance: f64, steps: usize, joint_closed: bool) -> Result<String, JsValue> {
    coupling_map_json(ChannelConstants { k0, d0, k_min }, max_distance, steps, joint_closed).map_err(|e| JsValue::from_str(&e))
}

/// `seed` arrives as a JS number; integers up to 2^53 are exact.
#[wasm_bindgen]
pub fn far_frr_curve(seed: f64, noise_stddev: f64, dropout_probability: f64, trials: u32) -> Result<String, JsValue> {
    if !(seed >= 0.0 && seed.fract() == 0.0 && seed <= 9_007_199_254_740_991.0) {
        return Err(JsValue::from_str("seed must be a non-negative integer"));
    }
    let settings = CaptureSettings { noise_stddev, dropout_probability };
    far_frr_curve_json(seed as u64, settings, trials).map_err(|e| JsValue::from_str(&e))
}
