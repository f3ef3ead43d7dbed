//! Fringe fitting and adjacent-bin relative phases.
//!
//! The primary estimator is the discrete first-harmonic projection
//! `ρ̂ = (2/K) Σ_k y_k e^{−iφ_k}`, `m̂ = (1/K) Σ_k y_k`, which is exact on a uniform grid of
//! K ≥ 3 points for a pure first-harmonic signal. With counts present a linear least-squares
//! refit of `m + A cos(φ + offset)` is applied on top.
//!
//! Sign convention: the fitted offset is `arg ρ_jk = θ_j − θ_k` for a pure state, so the
//! adjacent relative phase `Δθ_j = θ_{j+1} − θ_j` is `reference_offset − fitted_offset`.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::interferometer::FringeScan;
use crate::phase::wrap;
use crate::serde_complex;
use crate::state::DensityMatrix;
use crate::{Error, Result};

pub const DEFAULT_VISIBILITY_FLOOR: f64 = 0.05;

/// Tolerance on the analyzer-phase grid spacing.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Fits below this visibility are rejected as [`Error::FringeFlat`].
    pub visibility_floor: f64,
    /// Apply the least-squares refit when counts are present.
    pub refine: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            visibility_floor: DEFAULT_VISIBILITY_FLOOR,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub pair: [usize; 2],
    /// Estimate of arg ρ_jk in (−π, π].
    pub offset: f64,
    /// Estimate of |ρ_jk|.
    #[serde(rename = "coherence")]
    pub coherence_magnitude: f64,
    /// Estimate of ½(p_j + p_k).
    #[serde(rename = "mean")]
    pub mean_level: f64,
    pub visibility: f64,
    pub stderr_offset: f64,
    #[serde(default)]
    pub stderr_coherence: f64,
    #[serde(default)]
    pub stderr_mean: f64,
}

impl FringeFit {
    pub fn pair(&self) -> (usize, usize) {
        (self.pair[0], self.pair[1])
    }

    /// `ρ̂_jk = |ρ̂| e^{i·offset}`.
    pub fn coherence(&self) -> Complex64 {
        Complex64::from_polar(self.coherence_magnitude, self.offset)
    }

    /// First-order propagated standard error of the visibility.
    pub fn stderr_visibility(&self) -> f64 {
        if self.coherence_magnitude <= 0.0 || self.mean_level <= 0.0 {
            return 0.0;
        }
        self.visibility
            * ((self.stderr_coherence / self.coherence_magnitude).powi(2)
                + (self.stderr_mean / self.mean_level).powi(2))
            .sqrt()
    }
}

/// True when the phases are `φ₀ + 2πk/K` for k = 0..K with K ≥ 3.
pub fn is_uniform_grid(phases: &[f64]) -> bool {
    let k = phases.len();
    if k < 3 {
        return false;
    }
    let step = TAU / k as f64;
    phases
        .iter()
        .enumerate()
        .all(|(i, p)| (p - phases[0] - step * i as f64).abs() < GRID_TOL)
}

/// Normalized observations `y_k` and whether they carry shot noise.
fn observations(scan: &FringeScan) -> Result<(Vec<f64>, bool)> {
    match &scan.counts {
        None => Ok((scan.probabilities.clone(), false)),
        Some(counts) => {
            if counts.iter().all(|&c| c == 0) {
                return Err(Error::NoCounts { pair: scan.pair() });
            }
            let n = scan.config.shots_per_point as f64;
            let y = counts.iter().map(|&c| c as f64 / n).collect();
            Ok((y, true))
        }
    }
}

/// Solves min Σ (y − m − c cos φ + s sin φ)² and returns (m, c + i s).
fn least_squares(phases: &[f64], y: &[f64]) -> Option<(f64, Complex64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&phi, &yk) in phases.iter().zip(y) {
        let row = Vector3::new(1.0, phi.cos(), -phi.sin());
        ata += row * row.transpose();
        aty += row * yk;
    }
    let sol = ata.lu().solve(&aty)?;
    Some((sol[0], Complex64::new(sol[1], sol[2])))
}

pub fn fit_fringe(scan: &FringeScan, opts: &FitOptions) -> Result<FringeFit> {
    let phases = &scan.config.phases;
    if !is_uniform_grid(phases) {
        return Err(Error::NonUniformGrid);
    }
    let (y, noisy) = observations(scan)?;
    let k = phases.len() as f64;

    let mut mean = y.iter().sum::<f64>() / k;
    let mut rho: Complex64 = phases
        .iter()
        .zip(&y)
        .map(|(&phi, &yk)| yk * Complex64::from_polar(1.0, -phi))
        .sum::<Complex64>()
        * (2.0 / k);

    if noisy && opts.refine {
        if let Some((m, z)) = least_squares(phases, &y) {
            mean = m;
            rho = z;
        }
    }

    let pair = scan.pair();
    let magnitude = rho.norm();
    let visibility = if mean > 0.0 { magnitude / mean } else { 0.0 };
    if visibility.is_nan() || visibility < opts.visibility_floor || mean <= 0.0 {
        return Err(Error::FringeFlat {
            pair,
            visibility,
            floor: opts.visibility_floor,
        });
    }
    let offset = wrap(rho.arg());

    // Poisson variance of y_k is P_k / N, estimated from the fitted model
    let (stderr_offset, stderr_coherence, stderr_mean) = if noisy {
        let n = scan.config.shots_per_point as f64;
        let (mut s_off, mut s_coh, mut s_mean) = (0.0, 0.0, 0.0);
        for &phi in phases {
            let model = (mean + magnitude * (phi + offset).cos()).max(0.0);
            let var = model / n;
            s_off += var * (phi + offset).sin().powi(2);
            s_coh += var * (phi + offset).cos().powi(2);
            s_mean += var;
        }
        let scale = 2.0 / k;
        (
            scale * s_off.sqrt() / magnitude,
            scale * s_coh.sqrt(),
            s_mean.sqrt() / k,
        )
    } else {
        (0.0, 0.0, 0.0)
    };

    Ok(FringeFit {
        pair: [pair.0, pair.1],
        offset,
        coherence_magnitude: magnitude,
        mean_level: mean,
        visibility,
        stderr_offset,
        stderr_coherence,
        stderr_mean,
    })
}

/// Adjacent-bin relative phases `Δθ_j` with their fringe visibilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePhaseSet {
    pub d: usize,
    pub delta_theta: Vec<f64>,
    pub visibilities: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub reference_bin: usize,
}

fn is_zero(x: &usize) -> bool {
    *x == 0
}

impl RelativePhaseSet {
    pub fn new(delta_theta: Vec<f64>, visibilities: Vec<f64>) -> Result<Self> {
        if delta_theta.len() != visibilities.len() {
            return Err(Error::DimensionMismatch {
                expected: delta_theta.len(),
                found: visibilities.len(),
            });
        }
        Ok(Self {
            d: delta_theta.len() + 1,
            delta_theta: delta_theta.into_iter().map(wrap).collect(),
            visibilities,
            reference_bin: 0,
        })
    }

    /// Exact relative phases of a list of per-bin phases, unit visibilities.
    pub fn from_bin_phases(theta: &[f64]) -> Self {
        let dt: Vec<f64> = theta.windows(2).map(|w| w[1] - w[0]).collect();
        let n = dt.len();
        Self::new(dt, vec![1.0; n]).expect("matching lengths")
    }

    pub fn with_reference_bin(mut self, bin: usize) -> Result<Self> {
        if bin >= self.d {
            return Err(Error::IndexOutOfRange {
                index: bin,
                dim: self.d,
            });
        }
        self.reference_bin = bin;
        Ok(self)
    }
}

/// Relative phases from adjacent-pair fits. `reference_offsets[j]`, when given, is the
/// fringe offset the target state itself shows on pair (j, j+1); zero otherwise.
pub fn relative_phases_from_fits(
    d: usize,
    fits: &[FringeFit],
    reference_offsets: Option<&[f64]>,
) -> Result<RelativePhaseSet> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 bins, got {d}"
        )));
    }
    if let Some(r) = reference_offsets {
        if r.len() != d - 1 {
            return Err(Error::DimensionMismatch {
                expected: d - 1,
                found: r.len(),
            });
        }
    }
    let mut delta = Vec::with_capacity(d - 1);
    let mut vis = Vec::with_capacity(d - 1);
    for j in 0..d - 1 {
        let fit = fits
            .iter()
            .find(|f| f.pair() == (j, j + 1))
            .ok_or(Error::MissingPair { pair: (j, j + 1) })?;
        let reference = reference_offsets.map_or(0.0, |r| r[j]);
        delta.push(wrap(reference - fit.offset));
        vis.push(fit.visibility);
    }
    RelativePhaseSet::new(delta, vis)
}

/// Fits the adjacent-pair scans (0,1)…(d−2,d−1) and assembles `Δθ`.
pub fn estimate_adjacent_phases(
    scans: &[FringeScan],
    opts: &FitOptions,
    reference_offsets: Option<&[f64]>,
) -> Result<(RelativePhaseSet, Vec<FringeFit>)> {
    let d = scans
        .iter()
        .map(|s| s.dim)
        .max()
        .ok_or(Error::MissingPair { pair: (0, 1) })?;
    let mut fits = Vec::with_capacity(d - 1);
    for j in 0..d - 1 {
        let scan = scans
            .iter()
            .find(|s| s.pair() == (j, j + 1))
            .ok_or(Error::MissingPair { pair: (j, j + 1) })?;
        fits.push(fit_fringe(scan, opts)?);
    }
    let phases = relative_phases_from_fits(d, &fits, reference_offsets)?;
    Ok((phases, fits))
}

/// Measured bin populations and their standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Populations {
    pub fn exact(values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            values,
            stderr: vec![0.0; n],
        }
    }

    /// Normalized computational-basis counts; Poisson errors propagated through the
    /// normalization.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter(
                "population counts are all zero".into(),
            ));
        }
        let n = total as f64;
        let values: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let stderr = values
            .iter()
            .map(|p| (p * (1.0 - p) / n).max(0.0).sqrt())
            .collect();
        Ok(Self { values, stderr })
    }
}

/// Density matrix with some off-diagonal entries not measured (`None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialDensityMatrix {
    pub dim: usize,
    #[serde(with = "serde_complex::option_matrix")]
    pub entries: Vec<Vec<Option<Complex64>>>,
}

impl PartialDensityMatrix {
    /// Upper-triangle pairs with no measured coherence.
    pub fn unknown_pairs(&self) -> Vec<(usize, usize)> {
        let d = self.dim;
        (0..d)
            .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
            .filter(|&(j, k)| self.entries[j][k].is_none())
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.unknown_pairs().is_empty()
    }

    /// Unknown entries set to zero; the result is not checked for positivity.
    pub fn fill_unknown_zero(&self) -> DensityMatrix {
        let d = self.dim;
        DensityMatrix::from_entries_unchecked(nalgebra::DMatrix::from_fn(d, d, |j, k| {
            self.entries[j][k].unwrap_or_default()
        }))
    }
}

/// Number of combined standard errors tolerated between a fringe mean and the populations.
pub const POPULATION_SIGMAS: f64 = 5.0;
const POPULATION_ABS_TOL: f64 = 1e-9;

/// Coherences `ρ_jk = |ρ̂| e^{i·offset}` from arbitrary pair scans, with populations on the
/// diagonal and unscanned entries left unknown.
pub fn pairwise_coherences(
    scans: &[FringeScan],
    populations: &Populations,
    opts: &FitOptions,
) -> Result<(PartialDensityMatrix, Vec<FringeFit>)> {
    let d = populations.values.len();
    let total: f64 = populations.values.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "populations sum to {total}, not 1"
        )));
    }
    let mut entries = vec![vec![None; d]; d];
    for (j, p) in populations.values.iter().enumerate() {
        entries[j][j] = Some(Complex64::new(*p, 0.0));
    }
    let mut fits = Vec::with_capacity(scans.len());
    for scan in scans {
        let (j, k) = scan.pair();
        if scan.dim != d || j >= d || k >= d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: scan.dim,
            });
        }
        let fit = fit_fringe(scan, opts)?;
        let expected_mean = 0.5 * (populations.values[j] + populations.values[k]);
        let sigma = (fit.stderr_mean.powi(2)
            + 0.25 * (populations.stderr[j].powi(2) + populations.stderr[k].powi(2)))
        .sqrt();
        let deviation = (fit.mean_level - expected_mean).abs();
        if deviation > POPULATION_SIGMAS * sigma + POPULATION_ABS_TOL {
            return Err(Error::PopulationMismatch {
                pair: (j, k),
                deviation,
                sigmas: if sigma > 0.0 {
                    deviation / sigma
                } else {
                    f64::INFINITY
                },
            });
        }
        let z = fit.coherence();
        entries[j][k] = Some(z);
        entries[k][j] = Some(z.conj());
        fits.push(fit);
    }
    Ok((PartialDensityMatrix { dim: d, entries }, fits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::{simulate_scan, Coherences, ScanConfig};
    use crate::phase::{circular_diff, circular_mean_std};
    use crate::state::{normalize, DiagonalPhaseUnitary, TimeBinState};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn example_rho() -> DensityMatrix {
        let r = Complex64::from_polar(0.3, 0.7);
        let mut m = DMatrix::from_element(3, 3, Complex64::new(0.0, 0.0));
        m[(0, 0)] = 0.4.into();
        m[(1, 1)] = 0.4.into();
        m[(2, 2)] = 0.2.into();
        m[(0, 1)] = r;
        m[(1, 0)] = r.conj();
        DensityMatrix::new(m).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, d: usize) -> TimeBinState {
        let amps: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        normalize(&amps).unwrap().0
    }

    fn with_phases(mags: &TimeBinState, theta: &[f64]) -> TimeBinState {
        DiagonalPhaseUnitary::new(theta.to_vec())
            .apply(mags)
            .unwrap()
    }

    #[test]
    fn exact_fit_of_example_rho() {
        let scan = simulate_scan(&example_rho(), &ScanConfig::noiseless((0, 1), 8)).unwrap();
        let fit = fit_fringe(&scan, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.offset, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coherence_magnitude, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.mean_level, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.visibility, 0.75, epsilon = 1e-12);
        assert_eq!(fit.stderr_offset, 0.0);
    }

    #[test]
    fn flat_fringe_rejected() {
        let rho = DensityMatrix::diagonal(&[0.5, 0.5]).unwrap();
        let scan = simulate_scan(&rho, &ScanConfig::noiseless((0, 1), 8)).unwrap();
        assert!(matches!(
            fit_fringe(&scan, &FitOptions::default()),
            Err(Error::FringeFlat { pair: (0, 1), .. })
        ));
    }

    #[test]
    fn uniform_qutrit_unit_visibility() {
        let s = TimeBinState::uniform(3).unwrap();
        let scan = simulate_scan(&s, &ScanConfig::noiseless((0, 1), 8)).unwrap();
        let fit = fit_fringe(&scan, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(fit.offset, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.visibility, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_validation() {
        let s = TimeBinState::uniform(3).unwrap();
        let mut cfg = ScanConfig::noiseless((0, 1), 8);
        cfg.phases[3] += 0.01;
        let scan = simulate_scan(&s, &cfg).unwrap();
        assert_eq!(
            fit_fringe(&scan, &FitOptions::default()),
            Err(Error::NonUniformGrid)
        );

        let scan = simulate_scan(&s, &ScanConfig::noiseless((0, 1), 2)).unwrap();
        assert_eq!(
            fit_fringe(&scan, &FitOptions::default()),
            Err(Error::NonUniformGrid)
        );

        // shifted start is still a uniform grid
        let cfg = ScanConfig {
            phases: crate::interferometer::uniform_phases(6)
                .iter()
                .map(|p| p + 0.4)
                .collect(),
            ..ScanConfig::noiseless((0, 1), 6)
        };
        let scan = simulate_scan(&s, &cfg).unwrap();
        assert!(fit_fringe(&scan, &FitOptions::default()).is_ok());
    }

    #[test]
    fn harmonic_estimator_exact_for_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let d = rng.gen_range(2..8);
            let s = random_state(&mut rng, d);
            let j = rng.gen_range(0..d - 1);
            let k = rng.gen_range(j + 1..d);
            let points = rng.gen_range(3..25);
            let scan = simulate_scan(&s, &ScanConfig::noiseless((j, k), points)).unwrap();
            let opts = FitOptions {
                visibility_floor: 0.0,
                refine: false,
            };
            let fit = fit_fringe(&scan, &opts).unwrap();
            let truth = s.coherence(j, k);
            assert_abs_diff_eq!(
                fit.mean_level,
                0.5 * (s.population(j) + s.population(k)),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(fit.coherence_magnitude, truth.norm(), epsilon = 1e-12);
            if truth.norm() > 1e-3 {
                assert!(circular_diff(fit.offset, truth.arg()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn least_squares_agrees_on_uniform_grid() {
        let rho = example_rho();
        let scan = simulate_scan(&rho, &ScanConfig::uniform((0, 1), 12, 5000, 8)).unwrap();
        let plain = fit_fringe(
            &scan,
            &FitOptions {
                refine: false,
                ..Default::default()
            },
        )
        .unwrap();
        let refined = fit_fringe(&scan, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(plain.offset, refined.offset, epsilon = 1e-12);
        assert_abs_diff_eq!(plain.mean_level, refined.mean_level, epsilon = 1e-12);
    }

    #[test]
    fn adjacent_phases_noiseless() {
        let mags = TimeBinState::uniform(3).unwrap();
        let s = with_phases(&mags, &[0.0, 0.3, -0.2]);
        let scans: Vec<_> = (0..2)
            .map(|j| simulate_scan(&s, &ScanConfig::noiseless((j, j + 1), 8)).unwrap())
            .collect();
        let (set, fits) = estimate_adjacent_phases(&scans, &FitOptions::default(), None).unwrap();
        assert_eq!(set.d, 3);
        assert_abs_diff_eq!(set.delta_theta[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(set.delta_theta[1], -0.5, epsilon = 1e-12);
        // offsets are the negated relative phases for a flat reference
        assert_abs_diff_eq!(fits[0].offset, -0.3, epsilon = 1e-12);

        let flat = TimeBinState::uniform(5).unwrap();
        let scans: Vec<_> = (0..4)
            .map(|j| simulate_scan(&flat, &ScanConfig::noiseless((j, j + 1), 8)).unwrap())
            .collect();
        let (set, _) = estimate_adjacent_phases(&scans, &FitOptions::default(), None).unwrap();
        for dt in set.delta_theta {
            assert_abs_diff_eq!(dt, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn adjacent_phases_missing_and_flat() {
        let s = TimeBinState::uniform(4).unwrap();
        let scans: Vec<_> = [(0, 1), (2, 3)]
            .iter()
            .map(|&p| simulate_scan(&s, &ScanConfig::noiseless(p, 8)).unwrap())
            .collect();
        assert!(matches!(
            estimate_adjacent_phases(&scans, &FitOptions::default(), None),
            Err(Error::MissingPair { pair: (1, 2) })
        ));

        let h = FRAC_1_SQRT_2;
        let gap = TimeBinState::from_amplitudes(vec![h.into(), 0.0.into(), h.into()]).unwrap();
        let scans: Vec<_> = (0..2)
            .map(|j| simulate_scan(&gap, &ScanConfig::noiseless((j, j + 1), 8)).unwrap())
            .collect();
        assert!(matches!(
            estimate_adjacent_phases(&scans, &FitOptions::default(), None),
            Err(Error::FringeFlat { pair: (0, 1), .. })
        ));
    }

    #[test]
    fn noisy_adjacent_phase_rms() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let mags = TimeBinState::uniform(4).unwrap();
        let mut sq = [0.0; 3];
        let trials = 100;
        for seed in 0..trials {
            let theta: Vec<f64> = (0..4).map(|_| rng.gen_range(-PI..PI)).collect();
            let s = with_phases(&mags, &theta);
            let scans: Vec<_> = (0..3)
                .map(|j| {
                    simulate_scan(
                        &s,
                        &ScanConfig::uniform((j, j + 1), 20, 10_000, seed * 10 + j as u64),
                    )
                    .unwrap()
                })
                .collect();
            let (set, _) = estimate_adjacent_phases(&scans, &FitOptions::default(), None).unwrap();
            for j in 0..3 {
                sq[j] += circular_diff(set.delta_theta[j], theta[j + 1] - theta[j]).powi(2);
            }
        }
        for s in sq {
            assert!((s / trials as f64).sqrt() < 0.05);
        }
    }

    #[test]
    fn offset_unbiased_and_stderr_matches_spread() {
        let rho = example_rho();
        let trials = 1000;
        let mut offsets = Vec::with_capacity(trials);
        let mut analytic = 0.0;
        for seed in 0..trials as u64 {
            let scan = simulate_scan(&rho, &ScanConfig::uniform((0, 1), 16, 10_000, seed)).unwrap();
            let fit = fit_fringe(&scan, &FitOptions::default()).unwrap();
            offsets.push(fit.offset);
            analytic += fit.stderr_offset;
        }
        analytic /= trials as f64;
        let (mean, spread) = circular_mean_std(&offsets);
        let se = spread / (trials as f64).sqrt();
        assert!(
            circular_diff(mean, 0.7).abs() < 3.0 * se,
            "bias {} se {se}",
            mean - 0.7
        );
        // empirical spread (bootstrap over seeds) vs analytic propagation
        assert!(
            (spread / analytic - 1.0).abs() < 0.1,
            "spread {spread} analytic {analytic}"
        );
    }

    #[test]
    fn branch_cut_offsets_stay_on_branch() {
        for truth in [PI - 0.01, -PI + 0.01] {
            let mut m = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
            m[(0, 0)] = 0.5.into();
            m[(1, 1)] = 0.5.into();
            m[(0, 1)] = Complex64::from_polar(0.45, truth);
            m[(1, 0)] = Complex64::from_polar(0.45, -truth);
            let rho = DensityMatrix::new(m).unwrap();
            let scan = simulate_scan(&rho, &ScanConfig::noiseless((0, 1), 8)).unwrap();
            let fit = fit_fringe(&scan, &FitOptions::default()).unwrap();
            assert!(circular_diff(fit.offset, truth).abs() < 1e-12);
            assert!(fit.offset > -PI && fit.offset <= PI);
        }
    }

    #[test]
    fn visibility_bounded_under_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..200 {
            let d = rng.gen_range(2..6);
            let s = random_state(&mut rng, d);
            let scan = simulate_scan(&s, &ScanConfig::uniform((0, 1), 12, 10_000, seed)).unwrap();
            match fit_fringe(
                &scan,
                &FitOptions {
                    visibility_floor: 0.0,
                    refine: true,
                },
            ) {
                Ok(fit) => assert!(fit.visibility <= 1.0 + 3.0 * fit.stderr_visibility() + 1e-12),
                Err(Error::NoCounts { .. }) | Err(Error::FringeFlat { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn all_zero_counts_rejected() {
        let h = FRAC_1_SQRT_2;
        let s = TimeBinState::from_amplitudes(vec![0.0.into(), 0.0.into(), h.into(), h.into()])
            .unwrap();
        let scan = simulate_scan(&s, &ScanConfig::uniform((0, 1), 8, 100, 1)).unwrap();
        assert_eq!(
            fit_fringe(&scan, &FitOptions::default()),
            Err(Error::NoCounts { pair: (0, 1) })
        );
    }

    #[test]
    fn pairwise_uniform_qutrit_complete() {
        let s = TimeBinState::uniform(3).unwrap();
        let scans: Vec<_> = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&p| simulate_scan(&s, &ScanConfig::noiseless(p, 8)).unwrap())
            .collect();
        let (partial, _) = pairwise_coherences(
            &scans,
            &Populations::exact(s.populations()),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(partial.is_complete());
        let rho = partial.fill_unknown_zero();
        for z in rho.entries().iter() {
            assert!((z - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn pairwise_partial_coverage() {
        let s = TimeBinState::uniform(4).unwrap();
        let scans: Vec<_> = (0..3)
            .map(|j| simulate_scan(&s, &ScanConfig::noiseless((j, j + 1), 8)).unwrap())
            .collect();
        let (partial, _) = pairwise_coherences(
            &scans,
            &Populations::exact(s.populations()),
            &FitOptions::default(),
        )
        .unwrap();
        assert_eq!(partial.unknown_pairs(), vec![(0, 2), (0, 3), (1, 3)]);
        assert!(partial.entries[2][0].is_none());
    }

    #[test]
    fn pairwise_gap_state() {
        let h = FRAC_1_SQRT_2;
        let s = TimeBinState::from_amplitudes(vec![h.into(), 0.0.into(), h.into()]).unwrap();
        let pops = Populations::exact(s.populations());
        let scan01 = simulate_scan(&s, &ScanConfig::noiseless((0, 1), 8)).unwrap();
        assert!(matches!(
            pairwise_coherences(&[scan01], &pops, &FitOptions::default()),
            Err(Error::FringeFlat { pair: (0, 1), .. })
        ));
        let scan02 = simulate_scan(&s, &ScanConfig::noiseless((0, 2), 8)).unwrap();
        let (partial, fits) =
            pairwise_coherences(&[scan02], &pops, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(fits[0].offset, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fits[0].coherence_magnitude, 0.5, epsilon = 1e-12);
        assert!(partial.entries[0][2].is_some());
    }

    #[test]
    fn population_mismatch_detected() {
        let s = TimeBinState::uniform(3).unwrap();
        let scan = simulate_scan(&s, &ScanConfig::noiseless((0, 1), 8)).unwrap();
        let wrong = Populations::exact(vec![0.6, 0.2, 0.2]);
        assert!(matches!(
            pairwise_coherences(&[scan], &wrong, &FitOptions::default()),
            Err(Error::PopulationMismatch { pair: (0, 1), .. })
        ));
    }

    #[test]
    fn fit_json_shape() {
        let scan = simulate_scan(&example_rho(), &ScanConfig::noiseless((0, 1), 8)).unwrap();
        let fit = fit_fringe(&scan, &FitOptions::default()).unwrap();
        let v = serde_json::to_value(&fit).unwrap();
        for key in [
            "pair",
            "offset",
            "coherence",
            "mean",
            "visibility",
            "stderr_offset",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let set = RelativePhaseSet::new(vec![0.1], vec![0.9]).unwrap();
        let v = serde_json::to_value(&set).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"d": 2, "delta_theta": [0.1], "visibilities": [0.9]})
        );
    }
}
