//! Analysis-interferometer fringe scans of bin pairs and Fourier-basis probabilities.
//!
//! A scan of pair (j, k) at analyzer phase φ records the single-port probability
//! `P(φ) = ½(p_j + p_k) + Re[e^{iφ} ρ_jk]`. With `shots_per_point = N > 0` each point also
//! carries a Poisson count with mean `N·P`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::state::{inverse_dft_apply, DensityMatrix, TimeBinState};
use crate::{Error, Result};

/// Slack allowed on a fringe probability before it is reported as out of range.
pub const PROB_GUARD: f64 = 1e-12;

/// Anything that supplies populations and pairwise coherences.
pub trait Coherences {
    fn dim(&self) -> usize;
    fn population(&self, j: usize) -> f64;
    /// `ρ_jk`.
    fn coherence(&self, j: usize, k: usize) -> Complex64;
}

impl Coherences for DensityMatrix {
    fn dim(&self) -> usize {
        DensityMatrix::dim(self)
    }

    fn population(&self, j: usize) -> f64 {
        self.entries()[(j, j)].re
    }

    fn coherence(&self, j: usize, k: usize) -> Complex64 {
        self.entries()[(j, k)]
    }
}

impl Coherences for TimeBinState {
    fn dim(&self) -> usize {
        TimeBinState::dim(self)
    }

    fn population(&self, j: usize) -> f64 {
        self.amplitudes()[j].norm_sqr()
    }

    /// `α_j α_k*` for a pure state.
    fn coherence(&self, j: usize, k: usize) -> Complex64 {
        let a = self.amplitudes();
        a[j] * a[k].conj()
    }
}

fn check_pair(dim: usize, j: usize, k: usize) -> Result<()> {
    for i in [j, k] {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
    }
    if j == k {
        return Err(Error::InvalidParameter(format!(
            "pair ({j}, {k}) must address two bins"
        )));
    }
    Ok(())
}

/// Ideal single-port fringe probability of pair (j, k) at analyzer phase `phi`.
pub fn fringe_probability<S: Coherences + ?Sized>(
    source: &S,
    j: usize,
    k: usize,
    phi: f64,
) -> Result<f64> {
    check_pair(source.dim(), j, k)?;
    let p = 0.5 * (source.population(j) + source.population(k))
        + (Complex64::from_polar(1.0, phi) * source.coherence(j, k)).re;
    if !(-PROB_GUARD..=1.0 + PROB_GUARD).contains(&p) {
        return Err(Error::ProbabilityOutOfRange { value: p });
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub pair: (usize, usize),
    pub phases: Vec<f64>,
    /// Mean photon number scale per point; 0 means noiseless.
    pub shots_per_point: u64,
    pub rng_seed: u64,
}

impl ScanConfig {
    /// `points` analyzer phases `2πk/points`, k = 0..points.
    pub fn uniform(
        pair: (usize, usize),
        points: usize,
        shots_per_point: u64,
        rng_seed: u64,
    ) -> Self {
        Self {
            pair,
            phases: uniform_phases(points),
            shots_per_point,
            rng_seed,
        }
    }

    pub fn noiseless(pair: (usize, usize), points: usize) -> Self {
        Self::uniform(pair, points, 0, 0)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let (j, k) = self.pair;
        check_pair(dim, j, k)?;
        if j > k {
            return Err(Error::InvalidParameter(format!(
                "scan pair ({j}, {k}) must be ordered j < k"
            )));
        }
        if self.phases.is_empty() {
            return Err(Error::InvalidParameter(
                "scan has no analyzer phases".into(),
            ));
        }
        Ok(())
    }
}

pub fn uniform_phases(points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| TAU * k as f64 / points as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub config: ScanConfig,
    /// Dimension of the scanned state.
    pub dim: usize,
    pub probabilities: Vec<f64>,
    /// Present iff `shots_per_point > 0`.
    pub counts: Option<Vec<u64>>,
}

impl FringeScan {
    pub fn pair(&self) -> (usize, usize) {
        self.config.pair
    }

    /// Scan CSV with header `phi,prob,counts`; the counts column is empty when noiseless.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phi,prob,counts\n");
        for (i, (phi, p)) in self
            .config
            .phases
            .iter()
            .zip(&self.probabilities)
            .enumerate()
        {
            let count = self
                .counts
                .as_ref()
                .map(|c| c[i].to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "{phi},{p},{count}");
        }
        out
    }

    pub fn metadata(&self) -> ScanMetadata {
        ScanMetadata {
            pair: [self.config.pair.0, self.config.pair.1],
            shots_per_point: self.config.shots_per_point,
            seed: self.config.rng_seed,
            d: self.dim,
            points: self.config.phases.len(),
        }
    }
}

/// JSON sidecar written next to each scan CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub pair: [usize; 2],
    #[serde(rename = "N")]
    pub shots_per_point: u64,
    pub seed: u64,
    pub d: usize,
    pub points: usize,
}

/// Simulates one pair scan; the generator is seeded from `config.rng_seed` and owned by
/// this call.
pub fn simulate_scan<S: Coherences + ?Sized>(
    source: &S,
    config: &ScanConfig,
) -> Result<FringeScan> {
    config.validate(source.dim())?;
    let (j, k) = config.pair;
    let probabilities = config
        .phases
        .iter()
        .map(|&phi| fringe_probability(source, j, k, phi))
        .collect::<Result<Vec<_>>>()?;
    let counts = (config.shots_per_point > 0).then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        probabilities
            .iter()
            .map(|p| poisson_count(&mut rng, config.shots_per_point as f64 * p.max(0.0)))
            .collect()
    });
    Ok(FringeScan {
        config: config.clone(),
        dim: source.dim(),
        probabilities,
        counts,
    })
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // mean is finite and positive here, so the distribution is always constructible
    let draw: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
    draw as u64
}

/// Independent Poisson counts with means `shots · p_i`.
pub fn sample_counts(probabilities: &[f64], shots: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    probabilities
        .iter()
        .map(|p| poisson_count(&mut rng, shots as f64 * p.max(0.0)))
        .collect()
}

/// `|⟨f_ℓ|ψ⟩|²` for the DFT basis `|f_ℓ⟩ = F_d |t_ℓ⟩`.
pub fn fourier_basis_probabilities(s: &TimeBinState) -> Result<Vec<f64>> {
    Ok(inverse_dft_apply(s)?
        .amplitudes()
        .iter()
        .map(|a| a.norm_sqr())
        .collect())
}

/// `⟨f_ℓ|ρ|f_ℓ⟩` for a (possibly reconstructed) density matrix.
pub fn fourier_basis_probabilities_rho(rho: &DensityMatrix) -> Vec<f64> {
    let d = rho.dim();
    let m = rho.entries();
    (0..d)
        .map(|l| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..d {
                for k in 0..d {
                    let phase = TAU * ((k * l) as f64 - (j * l) as f64) / d as f64;
                    acc += m[(j, k)] * Complex64::from_polar(1.0, phase);
                }
            }
            acc.re / d as f64
        })
        .collect()
}

/// Decorrelated per-stream seed (SplitMix64 finalizer over `base + stream`).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
