//! Fast invariant suite over all modules.
//!
//! The phase estimator and the dual-quadrature range are injectable so that
//! deliberately broken variants can be shown to fail.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use multiclock::estimation::{
    estimate_phase_from_contrasts, estimate_single_basis, fit_folded_gaussian, gain_db_from_tmax_ratio,
    phase_slip_probability, sample_folded_gaussian, subtract_qpn, t_max, wrap_phase, DynamicRange, PhaseFit,
    Quadrature, ShotTable,
};
use multiclock::multi_ensemble::{cascaded_unwrap, slip_probability_multi, EnsembleEstimate};
use multiclock::qubit::{state_fidelity, tomography_reconstruct, Basis};
use multiclock::rng;
use multiclock::sequence::{
    build_cardinal_array, build_kernel_schedule, build_local_dd, build_parity_addressing, effective_phase_fraction,
    with_measurement, CompileOptions, EnsembleLayout, PulseSequence,
};
use multiclock::simulate::{Detuning, Environment, Simulation};
use multiclock::special::{erfc, erfc_inv};

use crate::config::{ExperimentConfig, ExperimentKind, Grid, SlipSection};

/// Replaceable parts of the pipeline.
#[derive(Clone, Copy)]
pub struct Hooks {
    /// `(z_x, z_y) → θ`.
    pub phase_estimator: fn(f64, f64) -> f64,
    /// Dynamic range of the dual-quadrature path.
    pub dual_range: f64,
}

fn default_estimator(zx: f64, zy: f64) -> f64 {
    estimate_phase_from_contrasts(zx, zy).unwrap_or(f64::NAN)
}

impl Default for Hooks {
    fn default() -> Self {
        Self { phase_estimator: default_estimator, dual_range: PI }
    }
}

type Check = fn(&Hooks) -> Result<(), String>;

const CHECKS: &[(&str, Check)] = &[
    ("phase inversion over (-pi, pi]", phase_inversion),
    ("single-basis aliasing", single_basis_aliasing),
    ("T_max ratio and gain", gain),
    ("erfc inverse round trip", erfc_round_trip),
    ("folded-Gaussian recovery", folded_recovery),
    ("T_max inverts slip probability", tmax_round_trip),
    ("projection-noise subtraction", qpn_subtraction),
    ("cascaded unwrap exhaustive scan", unwrap_scan),
    ("single-ensemble slip vs erfc", slip_vs_erfc),
    ("parity period and static sites", parity),
    ("local DD fractions", local_dd),
    ("kernel segment sum", kernel),
    ("noise-free tomography", tomography),
    ("sequence and shot-table text round trip", text_round_trip),
    ("run reproducibility", reproducibility),
];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: &'static str,
    pub result: Result<(), String>,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub outcomes: Vec<Outcome>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.result.is_ok())
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.outcomes.iter().filter(|o| o.result.is_err()).map(|o| o.name).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for o in &self.outcomes {
            match &o.result {
                Ok(()) => s.push_str(&format!("PASS  {}\n", o.name)),
                Err(e) => s.push_str(&format!("FAIL  {}: {e}\n", o.name)),
            }
        }
        let failed = self.failed().len();
        s.push_str(&format!("{} passed, {failed} failed\n", self.outcomes.len() - failed));
        s
    }
}

pub fn selftest() -> Summary {
    selftest_with(&Hooks::default())
}

pub fn selftest_with(hooks: &Hooks) -> Summary {
    Summary { outcomes: CHECKS.iter().map(|(name, check)| Outcome { name, result: check(hooks) }).collect() }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn phase_inversion(h: &Hooks) -> Result<(), String> {
    for i in 0..=2000 {
        let theta = -PI + TAU * i as f64 / 2000.0;
        let theta = if i == 0 { PI } else { theta };
        let got = (h.phase_estimator)(theta.cos(), theta.sin());
        ensure(wrap_phase(got - theta).abs() < 1e-12, || format!("theta={theta}: got {got}"))?;
    }
    Ok(())
}

fn single_basis_aliasing(_: &Hooks) -> Result<(), String> {
    for i in 1..100 {
        let t0 = -FRAC_PI_2 + PI * i as f64 / 100.0;
        let a = estimate_single_basis((1.0 + t0.sin()) / 2.0);
        let b = estimate_single_basis((1.0 + (PI - t0).sin()) / 2.0);
        ensure((a - b).abs() < 1e-12, || format!("{t0} and pi-{t0} read differently"))?;
        ensure((a - t0).abs() < 1e-9, || format!("{t0} read as {a}"))?;
    }
    Ok(())
}

fn gain(h: &Hooks) -> Result<(), String> {
    let fit = PhaseFit::new(PI * 0.117, 0.59, 0.0).map_err(|e| e.to_string())?;
    let dual = DynamicRange::new(h.dual_range).map_err(|e| e.to_string())?;
    let r = t_max(0.01, &fit, dual).map_err(|e| e.to_string())?
        / t_max(0.01, &fit, DynamicRange::SINGLE_QUADRATURE).map_err(|e| e.to_string())?;
    let g = gain_db_from_tmax_ratio(r);
    ensure((r - 3.24).abs() <= 0.02 && (g - 2.55).abs() <= 0.05, || format!("ratio {r:.4}, gain {g:.4} dB"))
}

fn erfc_round_trip(_: &Hooks) -> Result<(), String> {
    for i in 1..200 {
        let y = i as f64 / 100.0;
        let x = erfc_inv(y).ok_or("erfc_inv undefined")?;
        ensure(((erfc(x) - y) / y).abs() < 1e-10, || format!("erfc(erfc_inv({y})) = {}", erfc(x)))?;
    }
    Ok(())
}

fn folded_recovery(_: &Hooks) -> Result<(), String> {
    let mut r = rng::stream(1, &[rng::label("selftest-folded")]);
    for ratio in [0.1, 0.4, 0.7] {
        let sigma = ratio * PI;
        let xs = sample_folded_gaussian(sigma, PI, 4000, &mut r);
        let fit = fit_folded_gaussian(&xs, PI).map_err(|e| e.to_string())?;
        ensure((fit / sigma - 1.0).abs() < 0.1, || format!("sigma {sigma}: fitted {fit}"))?;
    }
    Ok(())
}

fn tmax_round_trip(_: &Hooks) -> Result<(), String> {
    let fit = PhaseFit::new(0.4, 0.7, 0.0).map_err(|e| e.to_string())?;
    for t in [0.5, 2.0, 9.0] {
        let eps = phase_slip_probability(fit.laser_sigma(t), DynamicRange::DUAL_QUADRATURE).map_err(|e| e.to_string())?;
        let back = t_max(eps, &fit, DynamicRange::DUAL_QUADRATURE).map_err(|e| e.to_string())?;
        ensure((back / t - 1.0).abs() < 1e-8, || format!("t={t} came back as {back}"))?;
    }
    Ok(())
}

fn qpn_subtraction(_: &Hooks) -> Result<(), String> {
    for (a, b) in [(0.0, 0.3), (0.5, 0.0), (1.2, 0.7)] {
        let got = subtract_qpn(f64::hypot(a, b), b).map_err(|e| e.to_string())?.sigma;
        ensure((got - a).abs() < 1e-12, || format!("a={a}, b={b}: {got}"))?;
    }
    Ok(())
}

fn unwrap_scan(_: &Hooks) -> Result<(), String> {
    let m = 3usize;
    let half = 2f64.powi(m as i32 - 1) * PI;
    let steps = 4000;
    for i in 1..=steps {
        let theta = -half + 2.0 * half * i as f64 / steps as f64;
        let est: Vec<EnsembleEstimate> = (0..m)
            .rev()
            .map(|k| EnsembleEstimate::new(k, wrap_phase(theta * 0.5f64.powi(k as i32)), 0))
            .collect();
        let u = cascaded_unwrap(&est).map_err(|e| e.to_string())?;
        ensure((u.theta_full - theta).abs() < 1e-9, || format!("theta={theta}: {}", u.theta_full))?;
    }
    Ok(())
}

fn slip_vs_erfc(_: &Hooks) -> Result<(), String> {
    let sigma = 1.3;
    let est = slip_probability_multi(sigma, 1, &[0.0], 20_000, 5).map_err(|e| e.to_string())?;
    let want = phase_slip_probability(sigma, DynamicRange::DUAL_QUADRATURE).map_err(|e| e.to_string())?;
    ensure((est.probability - want).abs() < 4.0 * est.stderr, || format!("MC {} vs erfc {want}", est.probability))
}

fn parity(_: &Hooks) -> Result<(), String> {
    let opts = CompileOptions::default();
    let lambda = opts.drive.wavelength_nm;
    let xs: Vec<f64> = (0..60).map(|i| 2.0 * lambda * i as f64 / 59.0).collect();
    let mut shifted = Vec::new();
    let mut first_static = None;
    for &dx in &xs {
        let seq = build_parity_addressing(4, dx, &opts).map_err(|e| e.to_string())?;
        let p = Simulation::new(&seq, &Environment::noiseless()).map_err(|e| e.to_string())?.noiseless_probabilities();
        shifted.push(p[1]);
        let st = [p[0].to_bits(), p[2].to_bits()];
        match first_static {
            None => first_static = Some(st),
            Some(f) => ensure(f == st, || format!("static sites changed at dx={dx}"))?,
        }
    }
    let fit = multiclock::fit::fit_sinusoid(&xs, &shifted, Some(4.0 / lambda)).map_err(|e| e.to_string())?;
    ensure((fit.period() / lambda - 1.0).abs() < 1e-3, || format!("period {}", fit.period()))
}

fn local_dd(_: &Hooks) -> Result<(), String> {
    let layout = EnsembleLayout::blocks(6, 3).map_err(|e| e.to_string())?;
    let seq = build_local_dd(&layout, 5000.0, &CompileOptions::default()).map_err(|e| e.to_string())?;
    for m in 0..3 {
        let f = effective_phase_fraction(&seq, layout.sites(m)[0]).map_err(|e| e.to_string())?;
        ensure(f == 0.5f64.powi(m as i32), || format!("ensemble {m}: fraction {f}"))?;
    }
    Ok(())
}

fn kernel(_: &Hooks) -> Result<(), String> {
    let layout = EnsembleLayout::blocks(6, 3).map_err(|e| e.to_string())?;
    let (tau, hz) = (700.0, vec![80.0, -45.0]);
    let (seq, _) = build_kernel_schedule(&layout, 2, tau, &CompileOptions::ideal()).map_err(|e| e.to_string())?;
    let env = Environment {
        detuning: Detuning::Piecewise { start_us: 0.0, segment_us: tau, hz: hz.clone() },
        ..Environment::noiseless()
    };
    let p = Simulation::new(&seq, &env).map_err(|e| e.to_string())?.noiseless_probabilities();
    for m in 0..3 {
        let x = layout.sites_in(m, Quadrature::X)[0];
        let y = layout.sites_in(m, Quadrature::Y)[0];
        let got = estimate_phase_from_contrasts(2.0 * p[x] - 1.0, 2.0 * p[y] - 1.0).map_err(|e| e.to_string())?;
        let want: f64 = hz.iter().map(|h| TAU * h * tau * 1e-6 * 0.5f64.powi(m as i32)).sum();
        ensure(wrap_phase(got - want).abs() < 1e-9, || format!("ensemble {m}: {got} vs {want}"))?;
    }
    Ok(())
}

fn tomography(_: &Hooks) -> Result<(), String> {
    let (states, prep) = build_cardinal_array(&CompileOptions::default()).map_err(|e| e.to_string())?;
    let p: Vec<Vec<f64>> = [Basis::X, Basis::Y, Basis::Z]
        .iter()
        .map(|&b| {
            let seq = with_measurement(&prep, vec![b; prep.array_size]).expect("matching size");
            Simulation::new(&seq, &Environment::noiseless()).expect("valid sequence").noiseless_probabilities()
        })
        .collect();
    for (j, s) in states.iter().enumerate() {
        let t = tomography_reconstruct(p[0][j], p[1][j], p[2][j]).map_err(|e| e.to_string())?;
        let f = state_fidelity(&t.rho, &s.target()).map_err(|e| e.to_string())?;
        ensure((f - 1.0).abs() < 1e-12, || format!("{}: fidelity {f}", s.label()))?;
    }
    Ok(())
}

fn text_round_trip(_: &Hooks) -> Result<(), String> {
    let layout = EnsembleLayout::blocks(6, 3).map_err(|e| e.to_string())?;
    let seq = build_local_dd(&layout, 4000.0, &CompileOptions::default()).map_err(|e| e.to_string())?;
    let back = PulseSequence::parse(&seq.to_text()).map_err(|e| e.to_string())?;
    ensure(back == seq, || "sequence changed in text round trip".into())?;
    let text = format!("{}\n0.5,0,0,0,X,1\n0.5,0,1,0,Y,0\n", multiclock::estimation::SHOT_TABLE_HEADER);
    let table = ShotTable::parse(&text).map_err(|e| e.to_string())?;
    ensure(ShotTable::parse(&table.to_text()).map_err(|e| e.to_string())? == table, || "shot table changed".into())
}

fn reproducibility(_: &Hooks) -> Result<(), String> {
    let cfg = ExperimentConfig {
        experiment: ExperimentKind::MultiEnsembleSlip,
        seed: Some(11),
        shots: None,
        array_size: None,
        output_dir: None,
        drive: None,
        noise: None,
        spam: None,
        timing: None,
        time_grid: None,
        parity: None,
        pattern: None,
        tomography: None,
        dual_quadrature: None,
        local_dd: None,
        kernel: None,
        slip: Some(SlipSection {
            sigma_full_rad: Grid::linear(0.5, 3.0, 4),
            ensembles: vec![1, 2],
            trials: 2000,
            stage_sigma_rad: Some(0.1),
            atoms_per_quadrature: None,
        }),
    };
    let v = cfg.validate().map_err(|e| e.to_string())?;
    let a = crate::run(&cfg, &v).map_err(|e| e.to_string())?;
    let b = crate::run(&cfg, &v).map_err(|e| e.to_string())?;
    ensure(a.table.to_csv() == b.table.to_csv() && a.report.to_json() == b.report.to_json(), || {
        "two identical runs differ".into()
    })
}
