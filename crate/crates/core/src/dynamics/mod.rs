//! Driven spin-½ dynamics and separation of total, dynamical and geometric phases.
//!
//! Units have ħ = 1; rates are angular frequencies. A single spin sees
//! `H(t) = (ω/2) n̂(t)·σ` with `n̂(t) = (sinθ cos Ωt, sinθ sin Ωt, cosθ)`. Two spins are
//! decoupled: `H = H_a ⊗ I + I ⊗ H_b`, basis order |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩.

mod phases;
mod propagate;
mod run;

pub use phases::{
    berry_connection_phase, bin_phases, correction_from_dynamics, decompose_phases,
    final_bin_state, identity_mapping, step_accumulators, BinPhaseReport, PhaseDecomposition,
    StepAccumulators,
};
pub use propagate::{expm_hermitian, propagate, spectral_norm, Stepper, Trajectory, STEP_LIMIT};
pub use run::{evolve, BerryReference, EvolveConfig, EvolveOutput, InitialPreset, InitialState};

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Below this ω/Ω the run is flagged non-adiabatic.
pub const ADIABATIC_RATIO: f64 = 10.0;

/// Effective field on one spin: constant-rate precession of the field direction on a cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSchedule {
    #[serde(default = "default_cone")]
    pub cone_angle: f64,
    #[serde(default = "default_gap")]
    pub spin_gap: f64,
    #[serde(default = "default_rate")]
    pub loop_rate: f64,
    #[serde(default = "default_cycles")]
    pub n_cycles: f64,
}

fn default_cone() -> f64 {
    PI / 3.0
}
fn default_gap() -> f64 {
    TAU
}
fn default_rate() -> f64 {
    TAU / 100.0
}
fn default_cycles() -> f64 {
    1.0
}

impl Default for FieldSchedule {
    fn default() -> Self {
        Self {
            cone_angle: default_cone(),
            spin_gap: default_gap(),
            loop_rate: default_rate(),
            n_cycles: default_cycles(),
        }
    }
}

impl FieldSchedule {
    pub fn new(cone_angle: f64, spin_gap: f64, loop_rate: f64, n_cycles: f64) -> Result<Self> {
        let s = Self {
            cone_angle,
            spin_gap,
            loop_rate,
            n_cycles,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.cone_angle,
            self.spin_gap,
            self.loop_rate,
            self.n_cycles,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || self.n_cycles < 0.0 {
            return Err(Error::InvalidParameter(
                "field schedule needs finite values and n_cycles ≥ 0".into(),
            ));
        }
        Ok(())
    }

    /// ω / Ω_rot; infinite for a static field.
    pub fn adiabaticity_ratio(&self) -> f64 {
        if self.loop_rate == 0.0 {
            f64::INFINITY
        } else {
            (self.spin_gap / self.loop_rate).abs()
        }
    }

    pub fn is_adiabatic(&self) -> bool {
        self.adiabaticity_ratio() >= ADIABATIC_RATIO
    }

    /// One loop period 2π/Ω_rot, `None` for a static field.
    pub fn period(&self) -> Option<f64> {
        (self.loop_rate != 0.0).then(|| TAU / self.loop_rate.abs())
    }

    /// `n_cycles` loop periods.
    pub fn duration(&self) -> Option<f64> {
        self.period().map(|p| p * self.n_cycles)
    }

    pub fn direction(&self, t: f64) -> [f64; 3] {
        let (st, ct) = self.cone_angle.sin_cos();
        let (sp, cp) = (self.loop_rate * t).sin_cos();
        [st * cp, st * sp, ct]
    }

    /// `(ω/2) n̂(t)·σ`.
    pub fn hamiltonian(&self, t: f64) -> DMatrix<Complex64> {
        let [x, y, z] = self.direction(t);
        let h = 0.5 * self.spin_gap;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(h * z, 0.0),
                Complex64::new(h * x, -h * y),
                Complex64::new(h * x, h * y),
                Complex64::new(-h * z, 0.0),
            ],
        )
    }

    /// Instantaneous eigenstate aligned with the field (energy +ω/2),
    /// `(cos θ/2, e^{iΩt} sin θ/2)`.
    pub fn aligned_state(&self, t: f64) -> [Complex64; 2] {
        let half = 0.5 * self.cone_angle;
        [
            Complex64::new(half.cos(), 0.0),
            Complex64::from_polar(half.sin(), self.loop_rate * t),
        ]
    }
}

/// Adiabatic Berry phase of the aligned state over one loop, `−π(1 − cos θ)`.
pub fn berry_solid_angle_phase(cone_angle: f64) -> f64 {
    -PI * (1.0 - cone_angle.cos())
}

/// One or two decoupled spins plus an optional constant energy shift `E₀·I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    schedules: Vec<FieldSchedule>,
    #[serde(default)]
    energy_offset: f64,
}

impl SpinSystem {
    pub fn new(schedules: Vec<FieldSchedule>) -> Result<Self> {
        if !(1..=2).contains(&schedules.len()) {
            return Err(Error::UnsupportedSpinCount(schedules.len()));
        }
        for s in &schedules {
            s.validate()?;
        }
        Ok(Self {
            schedules,
            energy_offset: 0.0,
        })
    }

    /// `n_spins` copies of the same schedule.
    pub fn uniform(schedule: FieldSchedule, n_spins: usize) -> Result<Self> {
        Self::new(vec![schedule; n_spins])
    }

    pub fn with_energy_offset(mut self, e0: f64) -> Self {
        self.energy_offset = e0;
        self
    }

    pub fn schedules(&self) -> &[FieldSchedule] {
        &self.schedules
    }

    pub fn n_spins(&self) -> usize {
        self.schedules.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.schedules.len()
    }

    pub fn energy_offset(&self) -> f64 {
        self.energy_offset
    }

    pub fn hamiltonian(&self, t: f64) -> DMatrix<Complex64> {
        let mut h = match self.schedules.as_slice() {
            [a] => a.hamiltonian(t),
            [a, b] => {
                let id = DMatrix::<Complex64>::identity(2, 2);
                a.hamiltonian(t).kronecker(&id) + id.kronecker(&b.hamiltonian(t))
            }
            _ => unreachable!("spin count checked at construction"),
        };
        if self.energy_offset != 0.0 {
            for i in 0..h.nrows() {
                h[(i, i)] += self.energy_offset;
            }
        }
        h
    }

    /// Product of the aligned eigenstates at t = 0.
    pub fn aligned_product_state(&self) -> DVector<Complex64> {
        self.schedules
            .iter()
            .map(|s| DVector::from_row_slice(&s.aligned_state(0.0)))
            .reduce(|acc, v| acc.kronecker(&v))
            .expect("at least one spin")
    }

    /// Uniform superposition of all basis states.
    pub fn uniform_state(&self) -> DVector<Complex64> {
        let d = self.dim();
        DVector::from_element(d, Complex64::new(1.0 / (d as f64).sqrt(), 0.0))
    }
}

/// H(t) for `n_spins` copies of one schedule.
pub fn hamiltonian_at(
    schedule: &FieldSchedule,
    t: f64,
    n_spins: usize,
) -> Result<DMatrix<Complex64>> {
    Ok(SpinSystem::uniform(*schedule, n_spins)?.hamiltonian(t))
}
