use std::fs;
use std::path::Path;

use anyhow::Context;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use timebin_core::correction::{
    build_plan, perturb, reference_offsets, verify_correction, ClosedLoopConfig, CorrectionPlanDoc,
};
use timebin_core::dynamics::{evolve, EvolveConfig};
use timebin_core::estimation::{fit_fringe, relative_phases_from_fits, FringeFit};
use timebin_core::interferometer::{derive_seed, simulate_scan, FringeScan, ScanConfig};
use timebin_core::state::{DensityMatrix, TimeBinState};
use timebin_core::tomography::{simulate_tomography, TomographyConfig};
use timebin_core::umzi::{cascade_with_spacing, CascadeConfig, CascadeResultDoc};
use timebin_core::Error;

use crate::config::{
    base_dir, read_json, CalibrateConfig, ConfigError, CorrectConfig, Source, TomoConfig, TomoInput,
};
use crate::{Cli, Command};

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: Command,
    config_path: &'a Path,
    output_dir: &'a Path,
    seed: u64,
    version: &'static str,
    jobs: usize,
    config: C,
}

struct Ctx<'a> {
    cli: &'a Cli,
    config_path: &'a Path,
    base: std::path::PathBuf,
    out: &'a Path,
}

impl Ctx<'_> {
    fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn write(&self, name: &str, text: &str) -> anyhow::Result<()> {
        let path = self.out.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn manifest<C: Serialize>(&self, seed: u64, config: C) -> anyhow::Result<()> {
        self.write_json(
            "manifest.json",
            &RunManifest {
                command: self.cli.command,
                config_path: self.config_path,
                output_dir: self.out,
                seed,
                version: env!("CARGO_PKG_VERSION"),
                jobs: self.cli.common.jobs,
                config,
            },
        )
    }

    fn pool(&self) -> anyhow::Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(self.cli.common.jobs.max(1))
            .build()?)
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let config_path = cli
        .common
        .config
        .as_deref()
        .ok_or_else(|| ConfigError("--config <file> is required".into()))?;
    let out = cli.common.out.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let ctx = Ctx {
        cli,
        config_path,
        base: base_dir(config_path),
        out,
    };
    match cli.command {
        Command::Generate => generate(&ctx),
        Command::Calibrate => calibrate(&ctx),
        Command::Correct => correct(&ctx),
        Command::Evolve => evolve_cmd(&ctx),
        Command::Tomo => tomo(&ctx),
    }
}

fn generate(ctx: &Ctx) -> anyhow::Result<()> {
    let cfg: CascadeConfig = read_json(ctx.config_path)?;
    let result = cascade_with_spacing(&cfg.stages, cfg.delta_t)?;
    if result.weight_exceeds_unity() {
        warn!("conditional weight {} exceeds 1", result.conditional_weight);
    }
    ctx.write_json("cascade.json", &CascadeResultDoc::from(&result))?;
    ctx.write_json("state.json", &result.state)?;
    ctx.manifest(ctx.cli.common.seed.unwrap_or(0), &cfg)
}

fn pair_stem(pair: (usize, usize)) -> String {
    format!("pair_{}_{}", pair.0, pair.1)
}

fn calibrate(ctx: &Ctx) -> anyhow::Result<()> {
    let mut cfg: CalibrateConfig = read_json(ctx.config_path)?;
    if let Some(seed) = ctx.cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = ctx.cli.common.shots {
        cfg.shots = shots;
    }
    let state = cfg.state.load(&ctx.base)?;
    let budget = cfg.budget.load(&ctx.base)?;
    let target = cfg.target.as_ref().map(|t| t.load(&ctx.base)).transpose()?;
    cfg.state = Source::Inline(state.clone());
    cfg.budget = Source::Inline(budget.clone());
    cfg.target = target.clone().map(Source::Inline);

    let perturbed = perturb(&state, &budget)?;
    ctx.write_json("perturbed_state.json", &perturbed)?;
    let refs = target.as_ref().map(reference_offsets).transpose()?;

    let d = state.dim();
    let results: Vec<(FringeScan, timebin_core::Result<FringeFit>)> =
        ctx.pool()?.install(|| {
            (0..d - 1)
                .into_par_iter()
                .map(|j| {
                    let pair = (j, j + 1);
                    let scan = simulate_scan(
                        &perturbed,
                        &ScanConfig::uniform(
                            pair,
                            cfg.points,
                            cfg.shots,
                            derive_seed(cfg.seed, j as u64),
                        ),
                    )?;
                    let fit = fit_fringe(&scan, &cfg.fit);
                    Ok((scan, fit))
                })
                .collect::<timebin_core::Result<Vec<_>>>()
        })?;

    let mut fits = Vec::with_capacity(results.len());
    for (scan, fit) in results {
        let stem = pair_stem(scan.pair());
        ctx.write(&format!("scan_{stem}.csv"), &scan.to_csv())?;
        ctx.write_json(&format!("scan_{stem}.meta.json"), &scan.metadata())?;
        let fit = fit.with_context(|| format!("fitting pair {:?}", scan.pair()))?;
        ctx.write_json(&format!("fit_{stem}.json"), &fit)?;
        fits.push(fit);
    }
    let phases = relative_phases_from_fits(d, &fits, refs.as_deref())?
        .with_reference_bin(cfg.reference_bin)?;
    ctx.write_json("relative_phases.json", &phases)?;
    ctx.manifest(cfg.seed, &cfg)
}

fn correct(ctx: &Ctx) -> anyhow::Result<()> {
    let mut cfg: CorrectConfig = read_json(ctx.config_path)?;
    if let Some(seed) = ctx.cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = ctx.cli.common.shots {
        cfg.shots = shots;
    }
    let phases = cfg.relative_phases.load(&ctx.base)?;
    let state = cfg.state.load(&ctx.base)?;
    let target = match &cfg.target {
        Some(t) => t.load(&ctx.base)?,
        None => state.flat_phase(),
    };
    cfg.relative_phases = Source::Inline(phases.clone());
    cfg.state = Source::Inline(state.clone());
    cfg.target = Some(Source::Inline(target.clone()));

    let plan = build_plan(&phases)?;
    let loop_cfg = ClosedLoopConfig {
        points: cfg.points,
        shots: cfg.shots,
        seed: cfg.seed,
        fit: cfg.fit,
        threshold: cfg.threshold,
        reference_bin: phases.reference_bin,
    };
    let (corrected, report) = verify_correction(&state, &target, &plan, &loop_cfg)?;
    ctx.write_json("correction_plan.json", &CorrectionPlanDoc::from(&plan))?;
    ctx.write_json("corrected_state.json", &corrected)?;
    ctx.write_json("verification.json", &report)?;
    ctx.manifest(cfg.seed, &cfg)?;
    if !report.passed {
        return Err(Error::VerificationFailed {
            fidelity: report.fidelity,
            threshold: report.threshold,
        }
        .into());
    }
    Ok(())
}

#[derive(Serialize)]
struct EvolveSummary<'a> {
    duration: f64,
    steps: usize,
    dt: f64,
    stepper: timebin_core::dynamics::Stepper,
    adiabaticity_ratios: &'a [f64],
    non_adiabatic: bool,
    max_norm_drift: f64,
    beta: f64,
    phi_dyn: f64,
    gamma: f64,
    diagnostic_geometric_accumulator: f64,
    diagnostic_dynamical_accumulator: f64,
    bins: &'a Option<timebin_core::dynamics::BinPhaseReport>,
    bin_warning: &'a Option<String>,
    correction_phases: Option<&'a [f64]>,
    corrected_fidelity: Option<f64>,
    berry: Option<timebin_core::dynamics::BerryReference>,
}

fn csv_text<R: Serialize>(
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn evolve_cmd(ctx: &Ctx) -> anyhow::Result<()> {
    let cfg: EvolveConfig = read_json(ctx.config_path)?;
    let out = evolve(&cfg).context("evolving")?;
    if out.non_adiabatic {
        warn!("adiabaticity ratio below 10: {:?}", out.adiabaticity_ratios);
    }
    let p = &out.decomposition;
    let rows = (0..p.times.len()).map(|k| (p.times[k], p.total[k], p.dynamical[k], p.geometric[k]));
    ctx.write(
        "phases.csv",
        &csv_text(&["t", "beta", "phi_dyn", "gamma"], rows)?,
    )?;
    let diag = &out.diagnostics;
    let rows = (0..diag.times.len()).map(|k| (diag.times[k], diag.geometric[k], diag.dynamical[k]));
    ctx.write(
        "diagnostics.csv",
        &csv_text(&["t", "geom_accum", "dyn_accum"], rows)?,
    )?;
    match (&out.bins, &out.bin_warning) {
        (Some(b), _) => {
            let rows = (0..b.d()).map(|j| (j, b.theta_abs[j], b.theta_mod2pi[j]));
            ctx.write(
                "bin_phases.csv",
                &csv_text(&["bin", "theta_abs", "theta_mod2pi"], rows)?,
            )?;
        }
        (None, Some(w)) => warn!("bin phases skipped: {w}"),
        (None, None) => {}
    }
    let summary = EvolveSummary {
        duration: out.duration,
        steps: out.steps,
        dt: out.dt,
        stepper: out.stepper,
        adiabaticity_ratios: &out.adiabaticity_ratios,
        non_adiabatic: out.non_adiabatic,
        max_norm_drift: out.max_norm_drift,
        beta: p.final_total(),
        phi_dyn: p.final_dynamical(),
        gamma: p.final_geometric(),
        diagnostic_geometric_accumulator: *diag.geometric.last().unwrap_or(&0.0),
        diagnostic_dynamical_accumulator: *diag.dynamical.last().unwrap_or(&0.0),
        bins: &out.bins,
        bin_warning: &out.bin_warning,
        correction_phases: out.correction.as_ref().map(|c| c.phases.as_slice()),
        corrected_fidelity: out.corrected_fidelity,
        berry: out.berry,
    };
    ctx.write_json("summary.json", &summary)?;
    ctx.manifest(ctx.cli.common.seed.unwrap_or(0), &cfg)
}

fn tomo(ctx: &Ctx) -> anyhow::Result<()> {
    let mut cfg: TomoConfig = read_json(ctx.config_path)?;
    if let Some(seed) = ctx.cli.common.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = ctx.cli.common.shots {
        cfg.shots = shots;
    }
    let truth = match &cfg.input {
        TomoInput::State(s) => {
            let state: TimeBinState = s.load(&ctx.base)?;
            cfg.input = TomoInput::State(Source::Inline(state.clone()));
            DensityMatrix::from_pure(&state)?
        }
        TomoInput::DensityMatrix(m) => {
            let doc = m.load(&ctx.base)?;
            cfg.input = TomoInput::DensityMatrix(Source::Inline(doc.clone()));
            DensityMatrix::from_doc(&doc)?
        }
    };
    let tcfg = TomographyConfig {
        pairs: cfg.pairs.clone(),
        points: cfg.points,
        shots: cfg.shots,
        population_shots: cfg.population_shots,
        fourier_shots: cfg.fourier_shots,
        seed: cfg.seed,
        fit: cfg.fit,
    };
    let run = simulate_tomography(&truth, &tcfg)?;
    let report = run.report();
    if !report.unknown_pairs.is_empty() {
        warn!(
            "unknown entries for pairs {:?}; set to zero",
            report.unknown_pairs
        );
    }
    if report.psd_projected {
        warn!("reconstruction was not PSD; eigenvalues clipped");
    }
    ctx.write_json("density_matrix.json", &report.density_matrix)?;
    ctx.write_json("tomo_report.json", &report)?;
    ctx.manifest(cfg.seed, &cfg)
}
