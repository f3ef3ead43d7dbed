//! Time-bin qudit states, diagonal phase unitaries, density matrices and the DFT basis.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::serde_complex;
use crate::{Error, Result};

/// Tolerance on Σ|α|² for a state to count as normalized.
pub const NORM_TOL: f64 = 1e-10;

/// Norms below this are treated as the zero vector.
pub const ZERO_NORM: f64 = 1e-14;

/// Time-bin grid metadata. Only `d` enters the numerics; the widths are carried for the
/// orthogonality check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinGrid {
    pub d: usize,
    pub delta_t: f64,
    #[serde(default)]
    pub sigma_pulse: f64,
    #[serde(default)]
    pub sigma_jitter: f64,
}

impl TimeBinGrid {
    pub fn new(d: usize, delta_t: f64, sigma_pulse: f64, sigma_jitter: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 bins, got {d}"
            )));
        }
        if delta_t.is_nan() || delta_t <= 0.0 || sigma_pulse < 0.0 || sigma_jitter < 0.0 {
            return Err(Error::InvalidParameter(
                "bin separation must be positive and widths nonnegative".into(),
            ));
        }
        Ok(Self {
            d,
            delta_t,
            sigma_pulse,
            sigma_jitter,
        })
    }

    /// Grid with unit bin separation and no pulse/jitter metadata.
    pub fn with_bins(d: usize) -> Result<Self> {
        Self::new(d, 1.0, 0.0, 0.0)
    }

    /// Bins are treated as orthogonal only when Δt exceeds pulse width plus jitter.
    pub fn is_valid(&self) -> bool {
        self.delta_t > self.sigma_pulse + self.sigma_jitter
    }
}

/// Pure time-bin qudit `Σ_j α_j |t_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBinState {
    grid: TimeBinGrid,
    amplitudes: Vec<Complex64>,
    normalized: bool,
}

impl TimeBinState {
    /// Wraps raw amplitudes. The `normalized` flag is computed, not trusted.
    pub fn new(grid: TimeBinGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.d {
            return Err(Error::DimensionMismatch {
                expected: grid.d,
                found: amplitudes.len(),
            });
        }
        let normalized = (norm_sqr(&amplitudes) - 1.0).abs() <= NORM_TOL;
        Ok(Self {
            grid,
            amplitudes,
            normalized,
        })
    }

    /// Normalized state on a unit-spacing grid; fails if the amplitudes are not normalized.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let s = Self::new(TimeBinGrid::with_bins(amplitudes.len())?, amplitudes)?;
        s.ensure_normalized()?;
        Ok(s)
    }

    /// `|t_j⟩` in dimension `d`.
    pub fn basis(d: usize, j: usize) -> Result<Self> {
        if j >= d {
            return Err(Error::IndexOutOfRange { index: j, dim: d });
        }
        let mut a = vec![Complex64::new(0.0, 0.0); d];
        a[j] = Complex64::new(1.0, 0.0);
        Self::from_amplitudes(a)
    }

    /// Flat-phase uniform superposition `(1/√d) Σ_j |t_j⟩`.
    pub fn uniform(d: usize) -> Result<Self> {
        let a = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        Self::from_amplitudes(vec![a; d])
    }

    pub fn grid(&self) -> &TimeBinGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.d
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn ensure_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized {
                norm_sqr: self.norm_sqr(),
            })
        }
    }

    /// Same grid and magnitudes, every phase set to zero.
    pub fn flat_phase(&self) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|a| Complex64::new(a.norm(), 0.0))
            .collect();
        Self {
            grid: self.grid,
            amplitudes,
            normalized: self.normalized,
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub(crate) fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), self.grid.d);
        let normalized = (norm_sqr(&amplitudes) - 1.0).abs() <= NORM_TOL;
        Self {
            grid: self.grid,
            amplitudes,
            normalized,
        }
    }
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Renormalizes raw amplitudes onto a unit-spacing grid. Returns the state and the
/// pre-normalization squared norm.
pub fn normalize(amplitudes: &[Complex64]) -> Result<(TimeBinState, f64)> {
    normalize_on(TimeBinGrid::with_bins(amplitudes.len())?, amplitudes)
}

pub fn normalize_on(grid: TimeBinGrid, amplitudes: &[Complex64]) -> Result<(TimeBinState, f64)> {
    let weight = norm_sqr(amplitudes);
    let norm = weight.sqrt();
    if norm < ZERO_NORM {
        return Err(Error::ZeroVector { norm });
    }
    let scaled = amplitudes.iter().map(|a| a / norm).collect();
    let state = TimeBinState::new(grid, scaled)?;
    Ok((state, weight))
}

/// `|⟨a|b⟩|²` for normalized states.
pub fn fidelity(a: &TimeBinState, b: &TimeBinState) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    a.ensure_normalized()?;
    b.ensure_normalized()?;
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// `diag(e^{iφ_0}, …, e^{iφ_{d-1}})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalPhaseUnitary {
    pub phases: Vec<f64>,
}

impl DiagonalPhaseUnitary {
    pub fn new(phases: Vec<f64>) -> Self {
        Self { phases }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.phases.iter().map(|p| -p).collect())
    }

    pub fn apply(&self, s: &TimeBinState) -> Result<TimeBinState> {
        apply_diagonal(self, s)
    }
}

pub fn apply_diagonal(u: &DiagonalPhaseUnitary, s: &TimeBinState) -> Result<TimeBinState> {
    check_dim(s.dim(), u.dim())?;
    let out = s
        .amplitudes
        .iter()
        .zip(&u.phases)
        .map(|(a, &p)| a * Complex64::from_polar(1.0, p))
        .collect();
    // phase-only action keeps the normalization flag
    Ok(TimeBinState {
        grid: s.grid,
        amplitudes: out,
        normalized: s.normalized,
    })
}

/// DFT matrix with `(F_d)_{ℓj} = e^{2πi jℓ/d} / √d`.
pub fn dft_matrix(d: usize) -> DMatrix<Complex64> {
    let scale = 1.0 / (d as f64).sqrt();
    DMatrix::from_fn(d, d, |l, j| {
        Complex64::from_polar(scale, TAU * ((j * l) % d) as f64 / d as f64)
    })
}

fn dft_with_sign(a: &[Complex64], sign: f64) -> Vec<Complex64> {
    let d = a.len();
    let scale = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|l| {
            a.iter()
                .enumerate()
                .map(|(j, x)| {
                    x * Complex64::from_polar(scale, sign * TAU * ((j * l) % d) as f64 / d as f64)
                })
                .sum()
        })
        .collect()
}

/// `F_d |ψ⟩`.
pub fn dft_apply(s: &TimeBinState) -> Result<TimeBinState> {
    s.ensure_normalized()?;
    Ok(s.with_amplitudes(dft_with_sign(&s.amplitudes, 1.0)))
}

/// `F_d† |ψ⟩`; its components are the Fourier-basis overlaps `⟨f_ℓ|ψ⟩`.
pub fn inverse_dft_apply(s: &TimeBinState) -> Result<TimeBinState> {
    s.ensure_normalized()?;
    Ok(s.with_amplitudes(dft_with_sign(&s.amplitudes, -1.0)))
}

/// Hermitian, unit-trace, positive semidefinite d×d operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let rho = Self { entries };
        let herm = rho.hermiticity_defect();
        if herm >= HERMITIAN_TOL {
            return Err(Error::InvalidParameter(format!(
                "matrix is not Hermitian (defect {herm:e})"
            )));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidParameter(format!("trace {tr} is not 1")));
        }
        let min_eig = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidParameter(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(rho)
    }

    /// No checks; used for intermediate reconstructions that may be indefinite.
    pub fn from_entries_unchecked(entries: DMatrix<Complex64>) -> Self {
        Self { entries }
    }

    pub fn from_pure(s: &TimeBinState) -> Result<Self> {
        s.ensure_normalized()?;
        let a = s.amplitudes();
        let d = a.len();
        Ok(Self {
            entries: DMatrix::from_fn(d, d, |j, k| a[j] * a[k].conj()),
        })
    }

    /// Incoherent mixture with the given populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let d = populations.len();
        Self::new(DMatrix::from_fn(d, d, |j, k| {
            if j == k {
                Complex64::new(populations[j], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, j: usize, k: usize) -> Result<Complex64> {
        let d = self.dim();
        for i in [j, k] {
            if i >= d {
                return Err(Error::IndexOutOfRange { index: i, dim: d });
            }
        }
        Ok(self.entries[(j, k)])
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.entries[(j, j)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let diff = &self.entries - self.entries.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok((&self.entries - &other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    pub fn to_doc(&self) -> DensityMatrixDoc {
        let d = self.dim();
        DensityMatrixDoc {
            dim: d,
            entries: (0..d)
                .map(|j| (0..d).map(|k| self.entries[(j, k)]).collect())
                .collect(),
        }
    }

    pub fn from_doc(doc: &DensityMatrixDoc) -> Result<Self> {
        let d = doc.dim;
        if doc.entries.len() != d || doc.entries.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: doc.entries.len(),
            });
        }
        Self::new(DMatrix::from_fn(d, d, |j, k| doc.entries[j][k]))
    }
}

/// JSON form of a density matrix, row-major `[re, im]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixDoc {
    pub dim: usize,
    #[serde(with = "serde_complex::matrix")]
    pub entries: Vec<Vec<Complex64>>,
}

/// JSON state document: `{"d", "delta_t", "amplitudes": [[re, im], ...], "normalized"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    pub d: usize,
    #[serde(default = "unit_spacing")]
    pub delta_t: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub sigma_pulse: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub sigma_jitter: f64,
    #[serde(with = "serde_complex::vec")]
    pub amplitudes: Vec<Complex64>,
    #[serde(default)]
    pub normalized: bool,
}

fn unit_spacing() -> f64 {
    1.0
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl From<&TimeBinState> for StateDoc {
    fn from(s: &TimeBinState) -> Self {
        Self {
            d: s.grid.d,
            delta_t: s.grid.delta_t,
            sigma_pulse: s.grid.sigma_pulse,
            sigma_jitter: s.grid.sigma_jitter,
            amplitudes: s.amplitudes.clone(),
            normalized: s.normalized,
        }
    }
}

impl TryFrom<StateDoc> for TimeBinState {
    type Error = Error;

    /// The stored `normalized` flag is recomputed from the amplitudes.
    fn try_from(doc: StateDoc) -> Result<Self> {
        let grid = TimeBinGrid::new(doc.d, doc.delta_t, doc.sigma_pulse, doc.sigma_jitter)?;
        TimeBinState::new(grid, doc.amplitudes)
    }
}

impl Serialize for TimeBinState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TimeBinState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = StateDoc::deserialize(d)?;
        TimeBinState::try_from(doc).map_err(serde::de::Error::custom)
    }
}
