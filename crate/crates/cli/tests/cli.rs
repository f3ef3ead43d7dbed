use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_timebin-calib");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_cmd(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn amps(v: &Value) -> Vec<(f64, f64)> {
    v["amplitudes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a[0].as_f64().unwrap(), a[1].as_f64().unwrap()))
        .collect()
}

fn f64s(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn uniform_state(d: usize) -> Value {
    let a = 1.0 / (d as f64).sqrt();
    json!({"d": d, "amplitudes": vec![[a, 0.0]; d]})
}

#[test]
fn generate_balanced_qutrit() {
    let tmp = TempDir::new().unwrap();
    let out = run_cmd(
        "generate",
        &configs().join("generate_qutrit.json"),
        tmp.path(),
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc = read(&tmp.path().join("cascade.json"));
    let s = 6f64.sqrt();
    for ((re, im), want) in amps(&doc["state"])
        .into_iter()
        .zip([1.0 / s, 2.0 / s, 1.0 / s])
    {
        assert!((re - want).abs() < 1e-12 && im.abs() < 1e-12);
    }
    assert_eq!(doc["weight_exceeds_unity"], json!(true));
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn generate_single_stage() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"stages": [{"eta": 0.5, "phi": 0.0}]}),
    );
    let out = run_cmd("generate", &cfg, &tmp.path().join("o"), &[]);
    assert!(out.status.success());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (re, _) in amps(&read(&tmp.path().join("o/cascade.json"))["state"]) {
        assert!((re - h).abs() < 1e-12);
    }
}

#[test]
fn malformed_config_is_a_parse_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, "{ \"stages\": [ ").unwrap();
    let out = run_cmd("generate", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let missing = run(&[
        "generate",
        "--config",
        tmp.path().join("nope.json").to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(run(&["generate"]).status.code(), Some(2));
}

#[test]
fn help_documents_exit_codes() {
    let out = run(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Exit codes"));
    assert!(text.contains("FringeFlat") && text.contains("VerificationFailed"));
}

#[test]
fn calibrate_technical_budget() {
    let tmp = TempDir::new().unwrap();
    let out = run_cmd(
        "calibrate",
        &configs().join("calibrate.json"),
        tmp.path(),
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let phases = f64s(&read(&tmp.path().join("relative_phases.json"))["delta_theta"]);
    assert!((phases[0] - 0.7).abs() < 1e-12 && (phases[1] - 0.4).abs() < 1e-12);
    for stem in ["pair_0_1", "pair_1_2"] {
        let csv = fs::read_to_string(tmp.path().join(format!("scan_{stem}.csv"))).unwrap();
        assert!(csv.starts_with("phi,prob,counts\n"));
        assert!(tmp.path().join(format!("scan_{stem}.meta.json")).exists());
        assert!(tmp.path().join(format!("fit_{stem}.json")).exists());
    }
}

#[test]
fn calibrate_zero_budget() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"state": uniform_state(4), "budget": {"tech": [0.0, 0.0, 0.0, 0.0]}}),
    );
    let out = run_cmd("calibrate", &cfg, &tmp.path().join("o"), &[]);
    assert!(out.status.success());
    for x in f64s(&read(&tmp.path().join("o/relative_phases.json"))["delta_theta"]) {
        assert!(x.abs() < 1e-12);
    }
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn noisy_calibration_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("calibrate.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run_cmd(
            "calibrate",
            &cfg,
            dir,
            &["--shots", "10000", "--seed", "99", "--jobs", "2"],
        );
        assert!(out.status.success());
    }
    let (fa, fb) = (dir_files(&a), dir_files(&b));
    assert_eq!(fa.len(), fb.len());
    for ((na, da), (nb, db)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        if na == "manifest.json" {
            let mut ma: Value = serde_json::from_slice(da).unwrap();
            let mut mb: Value = serde_json::from_slice(db).unwrap();
            ma["output_dir"] = Value::Null;
            mb["output_dir"] = Value::Null;
            assert_eq!(ma, mb);
            assert_eq!(ma["seed"], json!(99));
            assert_eq!(ma["config"]["shots"], json!(10000));
        } else {
            assert_eq!(da, db, "{na} differs");
        }
    }
    let counts = fs::read_to_string(a.join("scan_pair_0_1.csv")).unwrap();
    assert!(counts
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse::<u64>()
        .is_ok());
}

#[test]
fn flat_fringe_has_its_own_exit_code() {
    let tmp = TempDir::new().unwrap();
    let state = json!({"d": 3, "amplitudes": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]});
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"state": state, "budget": {"tech": [0.0, 0.0, 0.0]}}),
    );
    let out = run_cmd("calibrate", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(0, 1)"));
}

fn calibrate_then_correct(tmp: &Path, delta_override: Option<Vec<f64>>) -> Output {
    let cal = tmp.join("cal");
    assert!(
        run_cmd("calibrate", &configs().join("calibrate.json"), &cal, &[])
            .status
            .success()
    );
    let phases = match delta_override {
        Some(d) => json!({"d": 3, "delta_theta": d, "visibilities": [1.0, 1.0]}),
        None => json!("cal/relative_phases.json"),
    };
    let cfg = write_config(
        tmp,
        "correct.json",
        &json!({"relative_phases": phases, "state": "cal/perturbed_state.json"}),
    );
    run_cmd("correct", &cfg, &tmp.join("cor"), &[])
}

#[test]
fn correct_restores_the_flat_state() {
    let tmp = TempDir::new().unwrap();
    let out = calibrate_then_correct(tmp.path(), None);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = read(&tmp.path().join("cor/verification.json"));
    assert!(v["fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    for r in f64s(&v["residual_offsets"]) {
        assert!(r.abs() < 1e-9);
    }
    let plan = read(&tmp.path().join("cor/correction_plan.json"));
    assert!(plan.get("cumulative").is_some() && plan.get("correction_phases").is_some());
    assert!(tmp.path().join("cor/corrected_state.json").exists());
}

#[test]
fn corrupted_plan_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let out = calibrate_then_correct(tmp.path(), Some(vec![0.2, -0.9]));
    assert_eq!(out.status.code(), Some(4));
    let v = read(&tmp.path().join("cor/verification.json"));
    assert_eq!(v["passed"], json!(false));
}

#[test]
fn identity_plan_on_unperturbed_state() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"relative_phases": {"d": 3, "delta_theta": [0.0, 0.0], "visibilities": [1.0, 1.0]}, "state": uniform_state(3)}),
    );
    let out = run_cmd("correct", &cfg, &tmp.path().join("o"), &[]);
    assert!(out.status.success());
    let f = read(&tmp.path().join("o/verification.json"))["fidelity"]
        .as_f64()
        .unwrap();
    assert!((f - 1.0).abs() < 1e-12);
}

fn csv_rows(p: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn evolve_single_spin_berry_phase() {
    let tmp = TempDir::new().unwrap();
    let out = run_cmd(
        "evolve",
        &configs().join("evolve_single.json"),
        tmp.path(),
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = csv_rows(&tmp.path().join("phases.csv"));
    assert_eq!(header, "t,beta,phi_dyn,gamma");
    assert_eq!(rows.len(), 10_001);
    let gamma = rows.last().unwrap()[3];
    assert!(
        (gamma + std::f64::consts::FRAC_PI_2).abs() < 0.05,
        "gamma {gamma}"
    );
    let (dheader, _) = csv_rows(&tmp.path().join("diagnostics.csv"));
    assert_eq!(dheader, "t,geom_accum,dyn_accum");
    let manifest = read(&tmp.path().join("manifest.json"));
    assert_eq!(manifest["command"], json!("evolve"));
    let summary = read(&tmp.path().join("summary.json"));
    assert!(summary["dt"].as_f64().unwrap() > 0.0);
    assert!(summary["adiabaticity_ratios"][0].as_f64().unwrap() > 99.0);
}

#[test]
fn evolve_zero_cone_has_no_geometric_phase() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"spins": [{"cone_angle": 0.0}], "steps": 2000}),
    );
    let out = run_cmd("evolve", &cfg, &tmp.path().join("o"), &[]);
    assert!(out.status.success());
    let (_, rows) = csv_rows(&tmp.path().join("o/phases.csv"));
    assert!(rows.iter().all(|r| r[3].abs() < 1e-8));
    assert!(!tmp.path().join("o/bin_phases.csv").exists());
}

#[test]
fn evolve_two_spins_four_distinct_bins() {
    let tmp = TempDir::new().unwrap();
    let out = run_cmd(
        "evolve",
        &configs().join("evolve_two_spin.json"),
        tmp.path(),
        &[],
    );
    assert!(out.status.success());
    let (header, rows) = csv_rows(&tmp.path().join("bin_phases.csv"));
    assert_eq!(header, "bin,theta_abs,theta_mod2pi");
    assert_eq!(rows.len(), 4);
    for i in 0..4 {
        assert!((0.0..std::f64::consts::TAU).contains(&rows[i][2]));
        for j in 0..i {
            assert!((rows[i][2] - rows[j][2]).abs() > 1e-3);
        }
    }
}

#[test]
fn evolve_step_guard_exit_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &json!({"steps": 10}));
    assert_eq!(
        run_cmd("evolve", &cfg, &tmp.path().join("o"), &[])
            .status
            .code(),
        Some(5)
    );
}

fn entries(v: &Value) -> Vec<Vec<(f64, f64)>> {
    v["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| {
            row.as_array()
                .unwrap()
                .iter()
                .map(|z| (z[0].as_f64().unwrap(), z[1].as_f64().unwrap()))
                .collect()
        })
        .collect()
}

#[test]
fn tomo_uniform_qutrit() {
    let tmp = TempDir::new().unwrap();
    let out = run_cmd("tomo", &configs().join("tomo_qutrit.json"), tmp.path(), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for row in entries(&read(&tmp.path().join("density_matrix.json"))) {
        for (re, im) in row {
            assert!((re - 1.0 / 3.0).abs() < 1e-10 && im.abs() < 1e-10);
        }
    }
    let report = read(&tmp.path().join("tomo_report.json"));
    assert!(report["fourier"]["max_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn tomo_maximally_mixed_without_coherences() {
    let tmp = TempDir::new().unwrap();
    let third = 1.0 / 3.0;
    let rho = json!({"dim": 3, "entries": [
        [[third, 0.0], [0.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [third, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 0.0], [third, 0.0]]
    ]});
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &json!({"density_matrix": rho, "pairs": []}),
    );
    let out = run_cmd("tomo", &cfg, &tmp.path().join("o"), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read(&tmp.path().join("o/tomo_report.json"));
    for p in f64s(&report["fourier"]["predicted"]) {
        assert!((p - third).abs() < 1e-12);
    }
    assert_eq!(report["unknown_pairs"].as_array().unwrap().len(), 3);
}

#[test]
fn tomo_noisy_fourier_bound() {
    let tmp = TempDir::new().unwrap();
    let out = run_cmd(
        "tomo",
        &configs().join("tomo_qutrit.json"),
        tmp.path(),
        &["--shots", "10000", "--seed", "5"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = read(&tmp.path().join("tomo_report.json"))["fourier"]["max_residual"]
        .as_f64()
        .unwrap();
    assert!(r <= 5.0 / 100.0, "residual {r}");
}
