use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::phases::identity_mapping;
use super::{
    berry_connection_phase, berry_solid_angle_phase, bin_phases, correction_from_dynamics,
    decompose_phases, final_bin_state, propagate, step_accumulators, BinPhaseReport, FieldSchedule,
    PhaseDecomposition, SpinSystem, StepAccumulators, Stepper,
};
use crate::state::{fidelity, DiagonalPhaseUnitary, TimeBinState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialPreset {
    /// Product of the field-aligned eigenstates at t = 0.
    Aligned,
    /// Equal-weight superposition of all basis states.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Preset(InitialPreset),
    Amplitudes(#[serde(with = "crate::serde_complex::vec")] Vec<Complex64>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Preset(InitialPreset::Aligned)
    }
}

impl InitialState {
    pub fn resolve(&self, system: &SpinSystem) -> DVector<Complex64> {
        match self {
            InitialState::Preset(InitialPreset::Aligned) => system.aligned_product_state(),
            InitialState::Preset(InitialPreset::Uniform) => system.uniform_state(),
            InitialState::Amplitudes(a) => DVector::from_row_slice(a),
        }
    }
}

fn default_spins() -> Vec<FieldSchedule> {
    vec![FieldSchedule::default()]
}
fn default_steps() -> usize {
    10_000
}
fn default_berry_samples() -> usize {
    2_000
}

/// Everything needed for one evolution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    #[serde(default = "default_spins")]
    pub spins: Vec<FieldSchedule>,
    #[serde(default)]
    pub energy_offset: f64,
    #[serde(default)]
    pub initial: InitialState,
    /// Defaults to the longest `n_cycles` loop duration among the spins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub stepper: Stepper,
    /// `mapping[basis] = bin`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<Vec<usize>>,
    #[serde(default = "default_berry_samples")]
    pub berry_samples: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            spins: default_spins(),
            energy_offset: 0.0,
            initial: InitialState::default(),
            duration: None,
            steps: default_steps(),
            stepper: Stepper::default(),
            mapping: None,
            berry_samples: default_berry_samples(),
        }
    }
}

impl EvolveConfig {
    pub fn system(&self) -> Result<SpinSystem> {
        Ok(SpinSystem::new(self.spins.clone())?.with_energy_offset(self.energy_offset))
    }

    pub fn resolved_duration(&self) -> Result<f64> {
        let t = match self.duration {
            Some(t) => t,
            None => self
                .spins
                .iter()
                .filter_map(FieldSchedule::duration)
                .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))))
                .ok_or_else(|| {
                    Error::InvalidParameter("static fields need an explicit duration".into())
                })?,
        };
        if t.is_nan() || t <= 0.0 || !t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "duration must be positive, got {t}"
            )));
        }
        Ok(t)
    }
}

/// Berry-phase references for a single spin on a closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerryReference {
    pub solid_angle: f64,
    pub wilson_loop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveOutput {
    pub duration: f64,
    pub steps: usize,
    pub dt: f64,
    pub stepper: Stepper,
    pub adiabaticity_ratios: Vec<f64>,
    pub non_adiabatic: bool,
    pub max_norm_drift: f64,
    pub decomposition: PhaseDecomposition,
    pub diagnostics: StepAccumulators,
    pub bins: Option<BinPhaseReport>,
    /// Reason the per-bin phases are missing.
    pub bin_warning: Option<String>,
    pub correction: Option<DiagonalPhaseUnitary>,
    /// Fidelity of the corrected final state with the final magnitudes carrying
    /// the initial per-bin phases.
    pub corrected_fidelity: Option<f64>,
    pub berry: Option<BerryReference>,
}

/// Propagates, decomposes the phases and derives the per-bin correction.
pub fn evolve(cfg: &EvolveConfig) -> Result<EvolveOutput> {
    let system = cfg.system()?;
    let duration = cfg.resolved_duration()?;
    if cfg.steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    let dt = duration / cfg.steps as f64;
    let psi0 = cfg.initial.resolve(&system);
    let traj = propagate(&system, &psi0, dt, cfg.steps, cfg.stepper)?;
    let decomposition = decompose_phases(&traj, &system)?;
    let diagnostics = step_accumulators(&traj, &system);

    let mapping = cfg
        .mapping
        .clone()
        .unwrap_or_else(|| identity_mapping(system.dim()));
    let (bins, bin_warning) = match bin_phases(&traj, &mapping) {
        Ok(r) => (Some(r), None),
        Err(e @ Error::AmplitudeVanished { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };

    let (correction, corrected_fidelity) = match &bins {
        Some(report) => {
            let u = correction_from_dynamics(report);
            let fin = final_bin_state(&traj, &mapping)?;
            let corrected = u.apply(&fin)?;
            let mut reference = vec![Complex64::new(0.0, 0.0); system.dim()];
            for (basis, &bin) in mapping.iter().enumerate() {
                reference[bin] =
                    Complex64::from_polar(fin.amplitudes()[bin].norm(), psi0[basis].arg());
            }
            let reference = TimeBinState::new(*fin.grid(), reference)?;
            (Some(u), Some(fidelity(&corrected, &reference)?))
        }
        None => (None, None),
    };

    let berry = match system.schedules() {
        [s] if s.period().is_some() && s.n_cycles.fract() == 0.0 && s.n_cycles > 0.0 => {
            Some(BerryReference {
                solid_angle: berry_solid_angle_phase(s.cone_angle) * s.n_cycles,
                wilson_loop: berry_connection_phase(s, cfg.berry_samples.max(3))?,
            })
        }
        _ => None,
    };

    let adiabaticity_ratios: Vec<f64> = system
        .schedules()
        .iter()
        .map(FieldSchedule::adiabaticity_ratio)
        .collect();
    Ok(EvolveOutput {
        duration,
        steps: cfg.steps,
        dt,
        stepper: cfg.stepper,
        non_adiabatic: system.schedules().iter().any(|s| !s.is_adiabatic()),
        adiabaticity_ratios,
        max_norm_drift: traj.max_norm_drift(),
        decomposition,
        diagnostics,
        bins,
        bin_warning,
        correction,
        corrected_fidelity,
        berry,
    })
}
