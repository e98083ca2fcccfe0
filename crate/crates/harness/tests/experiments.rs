use std::path::PathBuf;

use multiclock_harness::{run, ExperimentConfig, ExperimentKind};

fn load(name: &str) -> ExperimentConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    ExperimentConfig::load(&path).unwrap()
}

#[test]
fn every_example_config_validates() {
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs"].iter().collect();
    let mut kinds = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let cfg = ExperimentConfig::load(&entry.unwrap().path()).unwrap();
        cfg.validate().unwrap();
        kinds.push(cfg.experiment);
    }
    for k in [
        ExperimentKind::ParitySweep,
        ExperimentKind::PhasePattern,
        ExperimentKind::CardinalTomography,
        ExperimentKind::DualQuadrature,
        ExperimentKind::LocalDd,
        ExperimentKind::KernelSchedule,
        ExperimentKind::MultiEnsembleSlip,
    ] {
        assert!(kinds.contains(&k), "no example for {k}");
    }
}

#[test]
fn dual_quadrature_reports_gain_near_2_55_db() {
    let cfg = load("dual_quadrature.toml");
    let out = run(&cfg, &cfg.validate().unwrap()).unwrap();
    let g = out.report.number("gain_db").unwrap();
    assert!((g - 2.55).abs() <= 0.05, "gain {g}");
    assert!(out.report.warnings.is_empty(), "{:?}", out.report.warnings);
    // ε is increasing in t and smaller for the wider range.
    let eps = |series: &str| -> Vec<f64> { out.table.series("epsilon", series).map(|r| r.value).collect() };
    let (single, dual) = (eps("B=pi/2"), eps("B=pi"));
    assert!(single.windows(2).all(|w| w[1] >= w[0]));
    assert!(single.iter().zip(&dual).all(|(s, d)| d <= s));
}

#[test]
fn phase_pattern_recovers_programmed_phases() {
    let cfg = load("pattern.toml");
    let out = run(&cfg, &cfg.validate().unwrap()).unwrap();
    let err = out.report.number("max_phase_error_rad").unwrap();
    assert!(err < 0.05, "max phase error {err}");
}

#[test]
fn slip_curves_do_not_increase_with_more_ensembles() {
    let mut cfg = load("multi_slip.toml");
    cfg.slip.as_mut().unwrap().trials = 20_000;
    let out = run(&cfg, &cfg.validate().unwrap()).unwrap();
    assert!(out.report.warnings.is_empty(), "{:?}", out.report.warnings);
    let m1: Vec<f64> = out.table.series("slip", "M=1").map(|r| r.value).collect();
    let erfc: Vec<f64> = out.table.series("slip", "erfc").map(|r| r.value).collect();
    let se: Vec<f64> = out.table.series("slip", "M=1").map(|r| r.stderr.unwrap()).collect();
    for i in 0..m1.len() {
        assert!((m1[i] - erfc[i]).abs() <= 4.0 * se[i].max(1e-4), "sigma index {i}: {} vs {}", m1[i], erfc[i]);
    }
    assert_eq!(out.report.number("ideal_stability_gain[M=4]").unwrap(), 2f64.sqrt());
}

#[test]
fn tomography_per_state_layout_matches_array_layout_without_noise() {
    let mut cfg = load("tomography.toml");
    cfg.noise.as_mut().unwrap().beta = 0.0;
    cfg.noise.as_mut().unwrap().pulse_infidelity_per_pi = 0.0;
    cfg.spam.as_mut().unwrap().preset = Some("perfect".into());
    cfg.shots = Some(200);
    for layout in ["array", "per-state"] {
        cfg.tomography.as_mut().unwrap().layout = layout.into();
        let out = run(&cfg, &cfg.validate().unwrap()).unwrap();
        assert_eq!(out.report.number("mean_fidelity").unwrap(), 1.0, "{layout}");
        assert_eq!(out.report.number("mean_fidelity_spam_corrected").unwrap(), 1.0, "{layout}");
    }
}
