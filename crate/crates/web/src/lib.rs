//! Browser bindings: fringe scan and fit, UMZI cascade, and spin phase decomposition.

use serde::Serialize;
use timebin_core::dynamics::{evolve, BerryReference, EvolveConfig, FieldSchedule};
use timebin_core::estimation::{fit_fringe, FitOptions, FringeFit};
use timebin_core::interferometer::{simulate_scan, ScanConfig};
use timebin_core::state::TimeBinState;
use timebin_core::umzi::{cascade, CascadeResultDoc, StageParams};
use timebin_core::Complex64;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct FringeDemo {
    pub phases: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub counts: Option<Vec<u64>>,
    /// Noiseless curve on a dense grid for overlay.
    pub curve_phases: Vec<f64>,
    pub curve: Vec<f64>,
    pub fit: FringeFit,
    pub true_offset: f64,
}

/// Equal-magnitude state with the given bin phases, scanned on pair (j, k).
pub fn fringe(
    bin_phases: &[f64],
    j: usize,
    k: usize,
    points: usize,
    shots: u64,
    seed: u64,
) -> Result<FringeDemo, String> {
    let d = bin_phases.len();
    let a = 1.0 / (d as f64).sqrt();
    let amps = bin_phases
        .iter()
        .map(|&p| Complex64::from_polar(a, p))
        .collect();
    let state = TimeBinState::from_amplitudes(amps).map_err(|e| e.to_string())?;
    let scan = simulate_scan(&state, &ScanConfig::uniform((j, k), points, shots, seed))
        .map_err(|e| e.to_string())?;
    let fit = fit_fringe(&scan, &FitOptions::default()).map_err(|e| e.to_string())?;
    let dense =
        simulate_scan(&state, &ScanConfig::noiseless((j, k), 200)).map_err(|e| e.to_string())?;
    let true_offset = timebin_core::phase::wrap(bin_phases[j] - bin_phases[k]);
    Ok(FringeDemo {
        probabilities: scan.probabilities.clone(),
        counts: scan.counts.clone(),
        phases: scan.config.phases.clone(),
        curve_phases: dense.config.phases.clone(),
        curve: dense.probabilities,
        fit,
        true_offset,
    })
}

pub fn umzi(etas: &[f64], phis: &[f64]) -> Result<CascadeResultDoc, String> {
    if etas.len() != phis.len() {
        return Err(format!(
            "{} splitting ratios but {} phases",
            etas.len(),
            phis.len()
        ));
    }
    let stages = etas
        .iter()
        .zip(phis)
        .map(|(&eta, &phi)| StageParams::new(eta, phi))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    cascade(&stages)
        .map(|r| CascadeResultDoc::from(&r))
        .map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct PhaseDemo {
    pub times: Vec<f64>,
    pub beta: Vec<f64>,
    pub phi_dyn: Vec<f64>,
    pub gamma: Vec<f64>,
    pub adiabaticity_ratio: f64,
    pub non_adiabatic: bool,
    pub berry: Option<BerryReference>,
}

/// Single aligned spin on a cone; series thinned to at most `max_points` samples.
pub fn phases(
    cone_angle: f64,
    spin_gap: f64,
    loop_rate: f64,
    n_cycles: f64,
    steps: usize,
    max_points: usize,
) -> Result<PhaseDemo, String> {
    let schedule =
        FieldSchedule::new(cone_angle, spin_gap, loop_rate, n_cycles).map_err(|e| e.to_string())?;
    let cfg = EvolveConfig {
        spins: vec![schedule],
        steps,
        berry_samples: 1000,
        ..Default::default()
    };
    let out = evolve(&cfg).map_err(|e| e.to_string())?;
    let p = out.decomposition;
    let stride = (p.times.len() / max_points.max(2)).max(1);
    let thin = |v: &[f64]| -> Vec<f64> {
        let mut t: Vec<f64> = v.iter().step_by(stride).copied().collect();
        if !(v.len() - 1).is_multiple_of(stride) {
            t.push(*v.last().expect("non-empty"));
        }
        t
    };
    Ok(PhaseDemo {
        times: thin(&p.times),
        beta: thin(&p.total),
        phi_dyn: thin(&p.dynamical),
        gamma: thin(&p.geometric),
        adiabaticity_ratio: out.adiabaticity_ratios[0],
        non_adiabatic: out.non_adiabatic,
        berry: out.berry,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<JsValue, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_wasm_bindgen::to_value(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = fringeScan)]
pub fn fringe_scan(
    bin_phases: Vec<f64>,
    j: usize,
    k: usize,
    points: usize,
    shots: u32,
    seed: u32,
) -> Result<JsValue, JsError> {
    to_js(fringe(&bin_phases, j, k, points, shots as u64, seed as u64))
}

#[wasm_bindgen(js_name = umziCascade)]
pub fn umzi_cascade(etas: Vec<f64>, phis: Vec<f64>) -> Result<JsValue, JsError> {
    to_js(umzi(&etas, &phis))
}

#[wasm_bindgen(js_name = spinPhases)]
pub fn spin_phases(
    cone_angle: f64,
    spin_gap: f64,
    loop_rate: f64,
    n_cycles: f64,
    steps: usize,
) -> Result<JsValue, JsError> {
    to_js(phases(
        cone_angle, spin_gap, loop_rate, n_cycles, steps, 600,
    ))
}
