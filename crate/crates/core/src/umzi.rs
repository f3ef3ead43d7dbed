//! Time-bin state generation by cascaded unbalanced Mach–Zehnder stages.
//!
//! Each stage maps `|t⟩ ↦ √η |t⟩ + √(1−η) e^{iφ} |t+Δt⟩`. Only the monitored output port is
//! modelled, so overlapping paths add coherently and the resulting amplitude vector is an
//! unnormalized conditional amplitude that gets renormalized. Its squared norm (the
//! conditional weight) can exceed one and is not a success probability.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::serde_complex;
use crate::state::{normalize_on, TimeBinGrid, TimeBinState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    /// Power splitting ratio in [0, 1].
    pub eta: f64,
    /// Arm phase in radians.
    pub phi: f64,
}

impl StageParams {
    pub fn new(eta: f64, phi: f64) -> Result<Self> {
        let s = Self { eta, phi };
        s.validate()?;
        Ok(s)
    }

    pub fn balanced(phi: f64) -> Self {
        Self { eta: 0.5, phi }
    }

    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.eta) && self.phi.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "splitting ratio {} outside [0, 1] or non-finite phase",
                self.eta
            )))
        }
    }
}

/// Cascade configuration JSON: `{"stages": [{"eta": .., "phi": ..}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub stages: Vec<StageParams>,
    #[serde(default = "default_delta_t")]
    pub delta_t: f64,
}

fn default_delta_t() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    pub raw_amplitudes: Vec<Complex64>,
    pub conditional_weight: f64,
    pub state: TimeBinState,
}

impl CascadeResult {
    /// Coherent bin overlap pushed the single-port weight above one.
    pub fn weight_exceeds_unity(&self) -> bool {
        self.conditional_weight > 1.0 + 1e-12
    }
}

#[derive(Serialize, Deserialize)]
pub struct CascadeResultDoc {
    #[serde(with = "serde_complex::vec")]
    pub raw_amplitudes: Vec<Complex64>,
    pub conditional_weight: f64,
    pub weight_exceeds_unity: bool,
    pub state: TimeBinState,
}

impl From<&CascadeResult> for CascadeResultDoc {
    fn from(r: &CascadeResult) -> Self {
        Self {
            raw_amplitudes: r.raw_amplitudes.clone(),
            conditional_weight: r.conditional_weight,
            weight_exceeds_unity: r.weight_exceeds_unity(),
            state: r.state.clone(),
        }
    }
}

/// One stage on a bin-amplitude vector; the output has one more bin.
pub fn apply_stage(input: &[Complex64], stage: StageParams) -> Vec<Complex64> {
    let early = stage.eta.sqrt();
    let late = Complex64::from_polar((1.0 - stage.eta).sqrt(), stage.phi);
    let mut out = vec![Complex64::new(0.0, 0.0); input.len() + 1];
    for (j, a) in input.iter().enumerate() {
        out[j] += early * a;
        out[j + 1] += late * a;
    }
    out
}

/// Folds the stages over a photon starting in bin 0 and post-selects the monitored port.
pub fn cascade(stages: &[StageParams]) -> Result<CascadeResult> {
    cascade_with_spacing(stages, 1.0)
}

pub fn cascade_with_spacing(stages: &[StageParams], delta_t: f64) -> Result<CascadeResult> {
    if stages.is_empty() {
        return Err(Error::InvalidParameter(
            "cascade needs at least one stage".into(),
        ));
    }
    for s in stages {
        s.validate()?;
    }
    let raw = stages
        .iter()
        .fold(vec![Complex64::new(1.0, 0.0)], |acc, s| {
            apply_stage(&acc, *s)
        });
    let grid = TimeBinGrid::new(raw.len(), delta_t, 0.0, 0.0)?;
    let (state, weight) = normalize_on(grid, &raw)?;
    Ok(CascadeResult {
        raw_amplitudes: raw,
        conditional_weight: weight,
        state,
    })
}

/// Closed-form raw amplitudes of two balanced stages:
/// `(1/2, (e^{iφ₁}+e^{iφ₂})/2, e^{i(φ₁+φ₂)}/2)`.
pub fn qutrit_closed_form(phi1: f64, phi2: f64) -> [Complex64; 3] {
    let e1 = Complex64::from_polar(1.0, phi1);
    let e2 = Complex64::from_polar(1.0, phi2);
    [
        Complex64::new(0.5, 0.0),
        (e1 + e2) * 0.5,
        Complex64::from_polar(0.5, phi1 + phi2),
    ]
}
