//! Phase budgets, cumulative feed-forward plans and the simulated closed loop
//! perturb → scan → fit → correct → verify.

use serde::{Deserialize, Serialize};

use crate::estimation::{
    fit_fringe, relative_phases_from_fits, FitOptions, FringeFit, RelativePhaseSet,
};
use crate::interferometer::{derive_seed, simulate_scan, Coherences, ScanConfig};
use crate::phase::wrap;
use crate::state::{fidelity, DiagonalPhaseUnitary, TimeBinState};
use crate::{Error, Result};

/// Per-bin phases θ_j = dyn_j + geom_j + tech_j.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseBudget {
    pub d: usize,
    #[serde(rename = "dyn")]
    pub dynamical: Vec<f64>,
    pub geom: Vec<f64>,
    pub tech: Vec<f64>,
}

impl PhaseBudget {
    pub fn new(dynamical: Vec<f64>, geom: Vec<f64>, tech: Vec<f64>) -> Result<Self> {
        let d = dynamical.len();
        for v in [&geom, &tech] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
        }
        Ok(Self {
            d,
            dynamical,
            geom,
            tech,
        })
    }

    pub fn zero(d: usize) -> Self {
        Self {
            d,
            dynamical: vec![0.0; d],
            geom: vec![0.0; d],
            tech: vec![0.0; d],
        }
    }

    pub fn technical(tech: Vec<f64>) -> Self {
        let d = tech.len();
        Self {
            tech,
            ..Self::zero(d)
        }
    }

    pub fn total(&self, j: usize) -> f64 {
        self.dynamical[j] + self.geom[j] + self.tech[j]
    }

    pub fn totals(&self) -> Vec<f64> {
        (0..self.d).map(|j| self.total(j)).collect()
    }

    /// `U_tot = diag(e^{iθ_j})`.
    pub fn unitary(&self) -> DiagonalPhaseUnitary {
        DiagonalPhaseUnitary::new(self.totals())
    }

    /// Exact `Δθ_j = θ_{j+1} − θ_j`.
    pub fn relative_phases(&self) -> RelativePhaseSet {
        RelativePhaseSet::from_bin_phases(&self.totals())
    }
}

/// JSON form; missing components default to zeros.
#[derive(Deserialize)]
struct PhaseBudgetDoc {
    #[serde(rename = "dyn", default)]
    dynamical: Option<Vec<f64>>,
    #[serde(default)]
    geom: Option<Vec<f64>>,
    #[serde(default)]
    tech: Option<Vec<f64>>,
    #[serde(default)]
    d: Option<usize>,
}

impl<'de> Deserialize<'de> for PhaseBudget {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let doc = PhaseBudgetDoc::deserialize(de)?;
        let d = doc
            .d
            .or_else(|| {
                [&doc.dynamical, &doc.geom, &doc.tech]
                    .iter()
                    .find_map(|v| v.as_ref().map(Vec::len))
            })
            .ok_or_else(|| {
                serde::de::Error::custom("budget needs `d` or at least one component")
            })?;
        let fill = |v: Option<Vec<f64>>| v.unwrap_or_else(|| vec![0.0; d]);
        let b = PhaseBudget::new(fill(doc.dynamical), fill(doc.geom), fill(doc.tech))
            .map_err(serde::de::Error::custom)?;
        if b.d != d {
            return Err(serde::de::Error::custom(format!(
                "budget components have length {} but d = {d}",
                b.d
            )));
        }
        Ok(b)
    }
}

/// Applies `U_tot` of the budget.
pub fn perturb(state: &TimeBinState, budget: &PhaseBudget) -> Result<TimeBinState> {
    if state.dim() != budget.d {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: budget.d,
        });
    }
    budget.unitary().apply(state)
}

/// Cumulative phases ϑ (unwrapped, ϑ_ref = 0) and the actuator unitary `diag(e^{−iϑ_j})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionPlan {
    pub cumulative: Vec<f64>,
    pub correction: DiagonalPhaseUnitary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionPlanDoc {
    pub cumulative: Vec<f64>,
    pub correction_phases: Vec<f64>,
}

impl From<&CorrectionPlan> for CorrectionPlanDoc {
    fn from(p: &CorrectionPlan) -> Self {
        Self {
            cumulative: p.cumulative.clone(),
            correction_phases: p.correction.phases.clone(),
        }
    }
}

impl CorrectionPlan {
    pub fn apply(&self, s: &TimeBinState) -> Result<TimeBinState> {
        self.correction.apply(s)
    }
}

pub fn build_plan(phases: &RelativePhaseSet) -> Result<CorrectionPlan> {
    if phases.d < 2 || phases.delta_theta.len() != phases.d - 1 {
        return Err(Error::InvalidParameter(format!(
            "relative phase set with d = {} has {} entries",
            phases.d,
            phases.delta_theta.len()
        )));
    }
    if phases.reference_bin >= phases.d {
        return Err(Error::IndexOutOfRange {
            index: phases.reference_bin,
            dim: phases.d,
        });
    }
    let mut cumulative = Vec::with_capacity(phases.d);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for dt in &phases.delta_theta {
        acc += dt;
        cumulative.push(acc);
    }
    let shift = cumulative[phases.reference_bin];
    if shift != 0.0 {
        cumulative.iter_mut().for_each(|v| *v -= shift);
    }
    // wrapped only at the actuator
    let correction = DiagonalPhaseUnitary::new(cumulative.iter().map(|v| wrap(-v)).collect());
    Ok(CorrectionPlan {
        cumulative,
        correction,
    })
}

/// Subtracts a modelled dynamical per-bin phase; the residual estimates geometric plus
/// technical relative phases.
pub fn separate_dynamical(
    phases: &RelativePhaseSet,
    dyn_model: &[f64],
) -> Result<RelativePhaseSet> {
    if dyn_model.len() != phases.d {
        return Err(Error::DimensionMismatch {
            expected: phases.d,
            found: dyn_model.len(),
        });
    }
    let delta_theta = phases
        .delta_theta
        .iter()
        .enumerate()
        .map(|(j, dt)| wrap(dt - (dyn_model[j + 1] - dyn_model[j])))
        .collect();
    Ok(RelativePhaseSet {
        delta_theta,
        ..phases.clone()
    })
}

/// Fringe offsets `arg(α_j α_{j+1}*)` of the target on each adjacent pair.
pub fn reference_offsets(target: &TimeBinState) -> Result<Vec<f64>> {
    (0..target.dim() - 1)
        .map(|j| {
            let z = target.coherence(j, j + 1);
            if z.norm() < 1e-12 {
                Err(Error::FringeFlat {
                    pair: (j, j + 1),
                    visibility: 0.0,
                    floor: 0.0,
                })
            } else {
                Ok(z.arg())
            }
        })
        .collect()
}

/// Loop-closure diagnostic for a non-adjacent pair (j, k): the relative phase implied by
/// its fringe minus the sum of adjacent phases between j and k, wrapped.
pub fn closure_residual(
    phases: &RelativePhaseSet,
    fit: &FringeFit,
    reference_offset: f64,
) -> Result<f64> {
    let (j, k) = fit.pair();
    if k >= phases.d || j >= k {
        return Err(Error::IndexOutOfRange {
            index: k,
            dim: phases.d,
        });
    }
    let direct = reference_offset - fit.offset;
    let chained: f64 = phases.delta_theta[j..k].iter().sum();
    Ok(wrap(direct - chained))
}

pub const NOISELESS_THRESHOLD: f64 = 1.0 - 1e-6;
pub const NOISY_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopConfig {
    /// Analyzer phases per scan (uniform grid).
    pub points: usize,
    /// Shots per analyzer phase; 0 for noiseless scans.
    pub shots: u64,
    pub seed: u64,
    #[serde(default)]
    pub fit: FitOptions,
    /// Post-correction fidelity threshold; defaults by noise mode.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub reference_bin: usize,
}

impl ClosedLoopConfig {
    pub fn noiseless(points: usize) -> Self {
        Self {
            points,
            shots: 0,
            seed: 0,
            fit: FitOptions::default(),
            threshold: None,
            reference_bin: 0,
        }
    }

    pub fn noisy(points: usize, shots: u64, seed: u64) -> Self {
        Self {
            shots,
            seed,
            ..Self::noiseless(points)
        }
    }

    pub fn effective_threshold(&self) -> f64 {
        self.threshold.unwrap_or(if self.shots == 0 {
            NOISELESS_THRESHOLD
        } else {
            NOISY_THRESHOLD
        })
    }

    pub(crate) fn scan(&self, pair: (usize, usize), stream: u64) -> ScanConfig {
        ScanConfig::uniform(
            pair,
            self.points,
            self.shots,
            derive_seed(self.seed, stream),
        )
    }
}

const VERIFY_STREAM: u64 = 1 << 32;

/// Scans and fits every adjacent pair of `state`.
pub fn scan_adjacent(
    state: &TimeBinState,
    cfg: &ClosedLoopConfig,
    stream_base: u64,
) -> Result<Vec<FringeFit>> {
    (0..state.dim() - 1)
        .map(|j| {
            let scan = simulate_scan(state, &cfg.scan((j, j + 1), stream_base + j as u64))?;
            fit_fringe(&scan, &cfg.fit)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub fidelity: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Verification-scan offsets minus the target's own offsets, wrapped.
    pub residual_offsets: Vec<f64>,
    pub visibilities: Vec<f64>,
}

/// Corrects `measured` with `plan`, rescans and compares with `target`.
pub fn verify_correction(
    measured: &TimeBinState,
    target: &TimeBinState,
    plan: &CorrectionPlan,
    cfg: &ClosedLoopConfig,
) -> Result<(TimeBinState, VerificationReport)> {
    let corrected = plan.apply(measured)?;
    let fid = fidelity(&corrected, target)?;
    let refs = reference_offsets(target)?;
    let fits = scan_adjacent(&corrected, cfg, VERIFY_STREAM)?;
    let threshold = cfg.effective_threshold();
    let report = VerificationReport {
        fidelity: fid,
        threshold,
        passed: fid >= threshold,
        residual_offsets: fits
            .iter()
            .zip(&refs)
            .map(|(f, r)| wrap(f.offset - r))
            .collect(),
        visibilities: fits.iter().map(|f| f.visibility).collect(),
    };
    Ok((corrected, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopReport {
    pub pre_fidelity: f64,
    pub post_fidelity: f64,
    pub threshold: f64,
    pub passed: bool,
    pub estimated: RelativePhaseSet,
    /// Exact Δθ of the applied budget.
    pub true_delta_theta: Vec<f64>,
    pub calibration_fits: Vec<FringeFit>,
    pub plan: CorrectionPlanDoc,
    pub residual_offsets: Vec<f64>,
    pub verification_visibilities: Vec<f64>,
    pub seed: u64,
    pub config: ClosedLoopConfig,
}

/// Runs the loop and reports; never fails on a low post-correction fidelity.
pub fn run_closed_loop(
    target: &TimeBinState,
    budget: &PhaseBudget,
    cfg: &ClosedLoopConfig,
) -> Result<ClosedLoopReport> {
    target.ensure_normalized()?;
    let perturbed = perturb(target, budget)?;
    let refs = reference_offsets(target)?;
    let fits = scan_adjacent(&perturbed, cfg, 0)?;
    let estimated = relative_phases_from_fits(target.dim(), &fits, Some(&refs))?
        .with_reference_bin(cfg.reference_bin)?;
    let plan = build_plan(&estimated)?;
    let (_, verification) = verify_correction(&perturbed, target, &plan, cfg)?;
    Ok(ClosedLoopReport {
        pre_fidelity: fidelity(&perturbed, target)?,
        post_fidelity: verification.fidelity,
        threshold: verification.threshold,
        passed: verification.passed,
        estimated,
        true_delta_theta: budget.relative_phases().delta_theta,
        calibration_fits: fits,
        plan: CorrectionPlanDoc::from(&plan),
        residual_offsets: verification.residual_offsets,
        verification_visibilities: verification.visibilities,
        seed: cfg.seed,
        config: cfg.clone(),
    })
}

/// As [`run_closed_loop`], failing with [`Error::VerificationFailed`] below threshold.
pub fn closed_loop(
    target: &TimeBinState,
    budget: &PhaseBudget,
    cfg: &ClosedLoopConfig,
) -> Result<ClosedLoopReport> {
    let report = run_closed_loop(target, budget, cfg)?;
    if !report.passed {
        return Err(Error::VerificationFailed {
            fidelity: report.post_fidelity,
            threshold: report.threshold,
        });
    }
    Ok(report)
}
