use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SpinSystem;
use crate::state::NORM_TOL;
use crate::{Error, Result};

/// Largest allowed `dt·‖H‖`. Keeps per-step phase changes well below π/2 so that
/// step-to-step unwrapping is unambiguous.
pub const STEP_LIMIT: f64 = 0.5;

/// Unitary one-step propagators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepper {
    /// `exp(−i H(t+dt/2) dt)`, second order.
    Midpoint,
    /// Fourth-order commutator-free Magnus: two exponentials built from H at the
    /// two Gauss–Legendre nodes.
    #[default]
    Magnus4,
}

/// `exp(−i H dt)` for Hermitian `H` via its eigendecomposition.
pub fn expm_hermitian(h: &DMatrix<Complex64>, dt: f64) -> DMatrix<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|l| Complex64::from_polar(1.0, -l * dt)),
    ));
    v * phases * v.adjoint()
}

/// Largest |eigenvalue| of a Hermitian matrix.
pub fn spectral_norm(h: &DMatrix<Complex64>) -> f64 {
    h.symmetric_eigenvalues()
        .iter()
        .fold(0.0, |m, l| m.max(l.abs()))
}

/// States sampled at `t_k = k·dt`, k = 0..=steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<Complex64>>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn final_state(&self) -> &DVector<Complex64> {
        self.states
            .last()
            .expect("trajectory has the initial sample")
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Integrates `i dψ/dt = H(t) ψ` over `steps` steps of size `dt`.
pub fn propagate(
    system: &SpinSystem,
    psi0: &DVector<Complex64>,
    dt: f64,
    steps: usize,
    stepper: Stepper,
) -> Result<Trajectory> {
    if psi0.len() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: psi0.len(),
        });
    }
    let norm_sqr = psi0.norm_squared();
    if (norm_sqr - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm_sqr });
    }
    if dt.is_nan() || dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(psi0.clone());
    let mut psi = psi0.clone();

    // Gauss nodes and the commutator-free weights
    let c1 = 0.5 - SQRT3 / 6.0;
    let c2 = 0.5 + SQRT3 / 6.0;
    let a1 = (3.0 - 2.0 * SQRT3) / 12.0;
    let a2 = (3.0 + 2.0 * SQRT3) / 12.0;

    for k in 0..steps {
        let t = k as f64 * dt;
        let mid = system.hamiltonian(t + 0.5 * dt);
        let product = dt * spectral_norm(&mid);
        if product > STEP_LIMIT {
            return Err(Error::StepTooLarge {
                product,
                limit: STEP_LIMIT,
            });
        }
        psi = match stepper {
            Stepper::Midpoint => expm_hermitian(&mid, dt) * psi,
            Stepper::Magnus4 => {
                let h1 = system.hamiltonian(t + c1 * dt);
                let h2 = system.hamiltonian(t + c2 * dt);
                let first = &h1 * Complex64::new(a2, 0.0) + &h2 * Complex64::new(a1, 0.0);
                let second = h1 * Complex64::new(a1, 0.0) + h2 * Complex64::new(a2, 0.0);
                expm_hermitian(&second, dt) * (expm_hermitian(&first, dt) * psi)
            }
        };
        times.push((k + 1) as f64 * dt);
        states.push(psi.clone());
    }
    Ok(Trajectory { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FieldSchedule;
    use std::f64::consts::PI;

    /// Closed-form spin-½ propagator `exp(−i t a·σ)`.
    fn su2(a: [f64; 3], t: f64) -> DMatrix<Complex64> {
        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let (s, c) = (n * t).sin_cos();
        let (x, y, z) = if n > 0.0 {
            (a[0] / n, a[1] / n, a[2] / n)
        } else {
            (0.0, 0.0, 0.0)
        };
        let i = Complex64::new(0.0, 1.0);
        DMatrix::from_row_slice(
            2,
            2,
            &[
                c - i * s * z,
                -i * s * Complex64::new(x, -y),
                -i * s * Complex64::new(x, y),
                c + i * s * z,
            ],
        )
    }

    #[test]
    fn stationary_eigenstate_evolves_by_phase() {
        let w = 2.0 * PI;
        let sys = SpinSystem::uniform(FieldSchedule::new(0.0, w, 0.3, 1.0).unwrap(), 1).unwrap();
        let up = DVector::from_row_slice(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        for stepper in [Stepper::Midpoint, Stepper::Magnus4] {
            let traj = propagate(&sys, &up, 0.01, 500, stepper).unwrap();
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let expected = Complex64::from_polar(1.0, -w * t / 2.0);
                assert!((s[0] - expected).norm() < 1e-12);
                assert!(s[1].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn expm_matches_su2() {
        let a = [0.3, -1.1, 0.7];
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(a[2], 0.0),
                Complex64::new(a[0], -a[1]),
                Complex64::new(a[0], a[1]),
                Complex64::new(-a[2], 0.0),
            ],
        );
        let diff = expm_hermitian(&h, 0.37) - su2(a, 0.37);
        assert!(diff.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn rotating_field_matches_rabi_solution() {
        // rotating frame: ψ(t) = e^{−iΩtσz/2} e^{−i(H₀ − Ωσz/2)t} ψ₀
        let sched = FieldSchedule::default();
        let sys = SpinSystem::uniform(sched, 1).unwrap();
        let psi0 = DVector::from_row_slice(&sched.aligned_state(0.0));
        let total = sched.duration().unwrap();
        let steps = 10_000;
        let traj = propagate(&sys, &psi0, total / steps as f64, steps, Stepper::Magnus4).unwrap();
        let h = 0.5 * sched.spin_gap;
        let (st, ct) = sched.cone_angle.sin_cos();
        let frame = su2([h * st, 0.0, h * ct - 0.5 * sched.loop_rate], total);
        let lab = su2([0.0, 0.0, 0.5 * sched.loop_rate], total);
        let exact = lab * frame * &psi0;
        let fid = exact.dotc(traj.final_state()).norm_sqr();
        assert!(fid >= 1.0 - 1e-8, "infidelity {}", 1.0 - fid);
        assert!(traj.max_norm_drift() < 1e-10);
    }

    #[test]
    fn step_guard() {
        let sys = SpinSystem::uniform(FieldSchedule::default(), 2).unwrap();
        let psi = sys.uniform_state();
        assert!(matches!(
            propagate(&sys, &psi, 0.2, 10, Stepper::Magnus4),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(propagate(&sys, &psi, 0.05, 10, Stepper::Magnus4).is_ok());
    }

    #[test]
    fn rejects_bad_initial_state() {
        let sys = SpinSystem::uniform(FieldSchedule::default(), 1).unwrap();
        let bad = DVector::from_row_slice(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(matches!(
            propagate(&sys, &bad, 0.01, 1, Stepper::Magnus4),
            Err(Error::NotNormalized { .. })
        ));
        let wrong_dim = DVector::from_element(4, Complex64::new(0.5, 0.0));
        assert!(matches!(
            propagate(&sys, &wrong_dim, 0.01, 1, Stepper::Magnus4),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn decoupled_spins_stay_product() {
        let a = FieldSchedule::default();
        let b = FieldSchedule::new(PI / 4.0, 1.3 * 2.0 * PI, 2.0 * PI / 80.0, 1.0).unwrap();
        let sys = SpinSystem::new(vec![a, b]).unwrap();
        let psi0 = sys.aligned_product_state();
        let traj = propagate(&sys, &psi0, 0.01, 3000, Stepper::Magnus4).unwrap();
        for s in traj.states.iter().step_by(100) {
            // reshape to 2×2; a product state has rank 1 (second singular value zero)
            let m = DMatrix::from_row_slice(2, 2, s.as_slice());
            let sv = m.singular_values();
            let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(smallest < 1e-9, "second singular value {smallest}");
        }
    }
}
