use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FieldSchedule, SpinSystem, Trajectory};
use crate::phase::{mod_two_pi, wrap, Unwrapper};
use crate::state::{DiagonalPhaseUnitary, TimeBinState};
use crate::{Error, Result};

/// Smallest |⟨ψ₀|ψ(t)⟩| for which the total phase is defined.
pub const OVERLAP_FLOOR: f64 = 1e-6;
/// Smallest bin amplitude whose phase is tracked.
pub const AMPLITUDE_FLOOR: f64 = 1e-8;

/// Total, dynamical and geometric phase along a trajectory, all unwrapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecomposition {
    pub times: Vec<f64>,
    pub total: Vec<f64>,
    pub dynamical: Vec<f64>,
    pub geometric: Vec<f64>,
}

impl PhaseDecomposition {
    pub fn final_total(&self) -> f64 {
        *self.total.last().expect("non-empty")
    }
    pub fn final_dynamical(&self) -> f64 {
        *self.dynamical.last().expect("non-empty")
    }
    pub fn final_geometric(&self) -> f64 {
        *self.geometric.last().expect("non-empty")
    }
}

fn expectation(system: &SpinSystem, t: f64, psi: &DVector<Complex64>) -> f64 {
    psi.dotc(&(system.hamiltonian(t) * psi)).re
}

/// β(t) = unwrapped arg⟨ψ₀|ψ(t)⟩, φ_dyn(t) = −∫⟨H⟩dt (trapezoid), γ = β − φ_dyn.
pub fn decompose_phases(
    trajectory: &Trajectory,
    system: &SpinSystem,
) -> Result<PhaseDecomposition> {
    let psi0 = &trajectory.states[0];
    let n = trajectory.states.len();
    let mut total = Vec::with_capacity(n);
    let mut dynamical = Vec::with_capacity(n);
    let mut unwrap = Unwrapper::new();
    let mut prev_energy = 0.0;
    let mut acc = 0.0;
    for (k, (t, psi)) in trajectory.times.iter().zip(&trajectory.states).enumerate() {
        let overlap = psi0.dotc(psi);
        if overlap.norm() < OVERLAP_FLOOR {
            return Err(Error::OverlapVanished { time: *t });
        }
        total.push(unwrap.push(overlap.arg()));
        let energy = expectation(system, *t, psi);
        if k > 0 {
            acc -= 0.5 * (energy + prev_energy) * (t - trajectory.times[k - 1]);
        }
        prev_energy = energy;
        dynamical.push(acc);
    }
    let geometric = total.iter().zip(&dynamical).map(|(b, d)| b - d).collect();
    Ok(PhaseDecomposition {
        times: trajectory.times.clone(),
        total,
        dynamical,
        geometric,
    })
}

/// Step-wise accumulators `Σ Im⟨ψ_k|ψ_{k+1} − ψ_k⟩` and `−Σ⟨ψ_k|H_k|ψ_k⟩Δt`.
/// First order in Δt and gauge dependent; kept for diagnostics only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAccumulators {
    pub times: Vec<f64>,
    pub geometric: Vec<f64>,
    pub dynamical: Vec<f64>,
}

pub fn step_accumulators(trajectory: &Trajectory, system: &SpinSystem) -> StepAccumulators {
    let n = trajectory.states.len();
    let mut geometric = Vec::with_capacity(n);
    let mut dynamical = Vec::with_capacity(n);
    let (mut g, mut d) = (0.0, 0.0);
    geometric.push(g);
    dynamical.push(d);
    for k in 1..n {
        let (a, b) = (&trajectory.states[k - 1], &trajectory.states[k]);
        let dt = trajectory.times[k] - trajectory.times[k - 1];
        g += a.dotc(b).im;
        d -= expectation(system, trajectory.times[k - 1], a) * dt;
        geometric.push(g);
        dynamical.push(d);
    }
    StepAccumulators {
        times: trajectory.times.clone(),
        geometric,
        dynamical,
    }
}

/// Discrete Wilson-loop Berry phase of the upper instantaneous eigenvector over
/// `n_cycles` loops, `−Σ arg⟨n_k|n_{k+1}⟩`. Eigenvectors come from numerical
/// diagonalisation, so their gauge is arbitrary.
pub fn berry_connection_phase(schedule: &FieldSchedule, samples: usize) -> Result<f64> {
    let total = schedule
        .duration()
        .ok_or_else(|| Error::InvalidParameter("Berry loop needs a rotating field".into()))?;
    if samples < 3 {
        return Err(Error::InvalidParameter(
            "Berry loop needs at least 3 samples".into(),
        ));
    }
    let eigvec = |t: f64| {
        let eig = schedule.hamiltonian(t).symmetric_eigen();
        let top = eig.eigenvalues.imax();
        eig.eigenvectors.column(top).into_owned()
    };
    let first = eigvec(0.0);
    let mut prev = first.clone();
    let mut gamma = 0.0;
    for k in 1..=samples {
        let next = if k == samples {
            first.clone()
        } else {
            eigvec(total * k as f64 / samples as f64)
        };
        gamma -= prev.dotc(&next).arg();
        prev = next;
    }
    Ok(gamma)
}

/// Per-bin accumulated phases after mapping basis states onto time bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPhaseReport {
    /// `mapping[basis] = bin`.
    pub mapping: Vec<usize>,
    pub theta_abs: Vec<f64>,
    pub theta_mod2pi: Vec<f64>,
}

impl BinPhaseReport {
    pub fn d(&self) -> usize {
        self.theta_abs.len()
    }
}

fn check_mapping(mapping: &[usize], dim: usize) -> Result<()> {
    if mapping.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: mapping.len(),
        });
    }
    let mut seen = vec![false; dim];
    for &b in mapping {
        if b >= dim {
            return Err(Error::IndexOutOfRange { index: b, dim });
        }
        if std::mem::replace(&mut seen[b], true) {
            return Err(Error::InvalidParameter(format!(
                "bin {b} appears twice in the mapping"
            )));
        }
    }
    Ok(())
}

/// Identity map basis index → bin index.
pub fn identity_mapping(dim: usize) -> Vec<usize> {
    (0..dim).collect()
}

/// `θ_j = arg α_j(T) − arg α_j(0)`, unwrapped along the trajectory.
pub fn bin_phases(trajectory: &Trajectory, mapping: &[usize]) -> Result<BinPhaseReport> {
    let dim = trajectory.dim();
    check_mapping(mapping, dim)?;
    let mut theta_abs = vec![0.0; dim];
    for (basis, &bin) in mapping.iter().enumerate() {
        let mut unwrap = Unwrapper::new();
        let mut start = 0.0;
        let mut last = 0.0;
        for (k, psi) in trajectory.states.iter().enumerate() {
            let a = psi[basis];
            if a.norm() < AMPLITUDE_FLOOR {
                return Err(Error::AmplitudeVanished { bin });
            }
            last = unwrap.push(a.arg());
            if k == 0 {
                start = last;
            }
        }
        theta_abs[bin] = last - start;
    }
    let theta_mod2pi = theta_abs.iter().map(|&t| mod_two_pi(t)).collect();
    Ok(BinPhaseReport {
        mapping: mapping.to_vec(),
        theta_abs,
        theta_mod2pi,
    })
}

/// Final state reordered into bin order.
pub fn final_bin_state(trajectory: &Trajectory, mapping: &[usize]) -> Result<TimeBinState> {
    let dim = trajectory.dim();
    check_mapping(mapping, dim)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for (basis, &bin) in mapping.iter().enumerate() {
        amps[bin] = trajectory.final_state()[basis];
    }
    TimeBinState::from_amplitudes(amps)
}

/// `diag(e^{−iθ_j})`, wrapped into (−π, π].
pub fn correction_from_dynamics(report: &BinPhaseReport) -> DiagonalPhaseUnitary {
    DiagonalPhaseUnitary::new(report.theta_abs.iter().map(|&t| wrap(-t)).collect())
}
