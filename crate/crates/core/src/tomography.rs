//! Density-matrix reconstruction from populations and pairwise fringes, with a
//! Fourier-basis consistency check.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::estimation::{
    pairwise_coherences, FitOptions, FringeFit, PartialDensityMatrix, Populations,
};
use crate::interferometer::{
    derive_seed, fourier_basis_probabilities_rho, sample_counts, simulate_scan, FringeScan,
    ScanConfig,
};
use crate::state::{DensityMatrix, DensityMatrixDoc};
use crate::{Error, Result};

/// Eigenvalues below this trigger the PSD projection.
pub const PROJECTION_TOL: f64 = 1e-12;

/// Clips negative eigenvalues to zero and renormalizes the trace. Returns the projected
/// matrix and whether anything was clipped.
pub fn project_psd(rho: &DensityMatrix) -> Result<(DensityMatrix, bool)> {
    let m = rho.entries();
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.clone().symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min >= -PROJECTION_TOL {
        return Ok((DensityMatrix::from_entries_unchecked(herm), false));
    }
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let trace: f64 = clipped.iter().sum();
    if trace <= 0.0 {
        return Err(Error::ZeroVector { norm: trace });
    }
    let d = rho.dim();
    let v = &eig.eigenvectors;
    let diag = DMatrix::from_fn(d, d, |j, k| {
        if j == k {
            Complex64::new(clipped[j] / trace, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let projected = v * diag * v.adjoint();
    Ok((DensityMatrix::from_entries_unchecked(projected), true))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    pub psd_projected: bool,
    pub unknown_pairs: Vec<(usize, usize)>,
    /// Eigenvalues before projection, ascending.
    pub raw_eigenvalues: Vec<f64>,
}

/// Fills unknown coherences with zero and projects onto the PSD cone if needed.
pub fn reconstruct(partial: &PartialDensityMatrix) -> Result<Reconstruction> {
    let raw = partial.fill_unknown_zero();
    let raw_eigenvalues = raw.eigenvalues();
    let (rho, psd_projected) = project_psd(&raw)?;
    Ok(Reconstruction {
        rho,
        psd_projected,
        unknown_pairs: partial.unknown_pairs(),
        raw_eigenvalues,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCheck {
    pub predicted: Vec<f64>,
    pub measured: Vec<f64>,
    pub max_residual: f64,
}

pub fn fourier_check(rho: &DensityMatrix, measured: &[f64]) -> Result<FourierCheck> {
    if measured.len() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: measured.len(),
        });
    }
    let predicted = fourier_basis_probabilities_rho(rho);
    let max_residual = predicted
        .iter()
        .zip(measured)
        .map(|(p, m)| (p - m).abs())
        .fold(0.0, f64::max);
    Ok(FourierCheck {
        predicted,
        measured: measured.to_vec(),
        max_residual,
    })
}

/// Which pairs get interferometric scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSelection {
    Named(PairPreset),
    List(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairPreset {
    All,
    Adjacent,
}

impl Default for PairSelection {
    fn default() -> Self {
        PairSelection::Named(PairPreset::All)
    }
}

impl PairSelection {
    pub fn pairs(&self, d: usize) -> Result<Vec<(usize, usize)>> {
        match self {
            PairSelection::Named(PairPreset::All) => Ok((0..d)
                .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
                .collect()),
            PairSelection::Named(PairPreset::Adjacent) => {
                Ok((0..d.saturating_sub(1)).map(|j| (j, j + 1)).collect())
            }
            PairSelection::List(list) => list
                .iter()
                .map(|&[j, k]| {
                    if j >= d || k >= d {
                        Err(Error::IndexOutOfRange {
                            index: j.max(k),
                            dim: d,
                        })
                    } else if j == k {
                        Err(Error::InvalidParameter(format!(
                            "pair ({j}, {k}) must address two bins"
                        )))
                    } else {
                        Ok((j.min(k), j.max(k)))
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    #[serde(default)]
    pub pairs: PairSelection,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Shots per analyzer phase; 0 is noiseless.
    #[serde(default)]
    pub shots: u64,
    /// Computational-basis shots for populations; defaults to `shots`.
    #[serde(default)]
    pub population_shots: Option<u64>,
    /// Fourier-basis shots; defaults to `shots`.
    #[serde(default)]
    pub fourier_shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fit: FitOptions,
}

fn default_points() -> usize {
    8
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            pairs: PairSelection::default(),
            points: default_points(),
            shots: 0,
            population_shots: None,
            fourier_shots: None,
            seed: 0,
            fit: FitOptions::default(),
        }
    }
}

const POPULATION_STREAM: u64 = 1 << 40;
const FOURIER_STREAM: u64 = 1 << 41;

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyRun {
    pub scans: Vec<FringeScan>,
    pub fits: Vec<FringeFit>,
    pub populations: Populations,
    pub reconstruction: Reconstruction,
    pub fourier: FourierCheck,
}

impl TomographyRun {
    pub fn report(&self) -> TomographyReport {
        TomographyReport {
            density_matrix: self.reconstruction.rho.to_doc(),
            psd_projected: self.reconstruction.psd_projected,
            raw_eigenvalues: self.reconstruction.raw_eigenvalues.clone(),
            unknown_pairs: self
                .reconstruction
                .unknown_pairs
                .iter()
                .map(|&(j, k)| [j, k])
                .collect(),
            populations: self.populations.values.clone(),
            fourier: self.fourier.clone(),
            fits: self.fits.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyReport {
    pub density_matrix: DensityMatrixDoc,
    pub psd_projected: bool,
    pub raw_eigenvalues: Vec<f64>,
    pub unknown_pairs: Vec<[usize; 2]>,
    pub populations: Vec<f64>,
    pub fourier: FourierCheck,
    pub fits: Vec<FringeFit>,
}

/// Simulates populations, pair scans and a Fourier-basis measurement of `truth`, then
/// reconstructs and cross-checks.
pub fn simulate_tomography(truth: &DensityMatrix, cfg: &TomographyConfig) -> Result<TomographyRun> {
    let d = truth.dim();
    let true_pops = truth.populations();
    let pop_shots = cfg.population_shots.unwrap_or(cfg.shots);
    let populations = if pop_shots == 0 {
        Populations::exact(true_pops)
    } else {
        Populations::from_counts(&sample_counts(
            &true_pops,
            pop_shots,
            derive_seed(cfg.seed, POPULATION_STREAM),
        ))?
    };

    let scans = cfg
        .pairs
        .pairs(d)?
        .into_iter()
        .enumerate()
        .map(|(i, pair)| {
            simulate_scan(
                truth,
                &ScanConfig::uniform(pair, cfg.points, cfg.shots, derive_seed(cfg.seed, i as u64)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let (partial, fits) = pairwise_coherences(&scans, &populations, &cfg.fit)?;
    let reconstruction = reconstruct(&partial)?;

    let true_fourier = fourier_basis_probabilities_rho(truth);
    let fourier_shots = cfg.fourier_shots.unwrap_or(cfg.shots);
    let measured = if fourier_shots == 0 {
        true_fourier
    } else {
        let counts = sample_counts(
            &true_fourier,
            fourier_shots,
            derive_seed(cfg.seed, FOURIER_STREAM),
        );
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter(
                "Fourier-basis counts are all zero".into(),
            ));
        }
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    };
    let fourier = fourier_check(&reconstruction.rho, &measured)?;

    Ok(TomographyRun {
        scans,
        fits,
        populations,
        reconstruction,
        fourier,
    })
}
