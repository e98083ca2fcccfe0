//! Acceptance criteria. Runs as a plain program so that every verdict line
//! appears in the test output; exits non-zero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use multiclock::estimation::{
    estimate_phase, estimate_single_basis, fit_folded_gaussian, gain_db_from_tmax_ratio, metrological_gain_db,
    t_max, wrap_phase, DynamicRange, PhaseFit, ShotRecord,
};
use multiclock::multi_ensemble::{cascaded_unwrap, slip_probability_multi, EnsembleEstimate};
use multiclock::rng;
use multiclock::sequence::{build_parity_addressing, CompileOptions, FlipMode};
use multiclock::simulate::{Environment, Simulation};
use multiclock_harness::{execute_config, Completed, ExperimentConfig, Report};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;

const LAMBDA_NM: f64 = 698.4;
/// Noise-growth fit of the measured Ramsey spread (radians, ms).
const BETA: f64 = PI * 0.117;
const ALPHA: f64 = 0.59;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn config(name: &str) -> ExperimentConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn run_in(mut cfg: ExperimentConfig, dir: &Path) -> Completed {
    cfg.output_dir = Some(dir.to_path_buf());
    execute_config(&cfg).unwrap_or_else(|e| panic!("{e}"))
}

fn number(r: &Report, key: &str) -> f64 {
    r.number(key).unwrap_or_else(|| panic!("report lacks `{key}`"))
}

/// Fixed-seed runner so the output is reproducible.
fn runner_with(config: PropConfig) -> TestRunner {
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

/// Independent `erfc` by composite Simpson integration of `2/√π·e^{−t²}`.
fn erfc_oracle(x: f64) -> f64 {
    let upper = x + 12.0;
    let n = 20_000;
    let h = (upper - x) / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(x) + f(upper);
    for i in 1..n {
        s += f(x + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 * 2.0 / PI.sqrt()
}

fn c1_parity_period(tmp: &Path) -> Verdict {
    let start = Instant::now();
    let done = run_in(config("parity.toml"), tmp);
    let elapsed = start.elapsed();
    let period = number(&done.output.report, "fitted_period_nm");
    let rel = (period - LAMBDA_NM).abs() / LAMBDA_NM;
    verdict(
        rel < 1e-3 && elapsed < Duration::from_secs(10),
        format!("period {period:.3} nm (rel. error {rel:.2e}), 39 sites x 200 points x 200 shots in {elapsed:.2?}"),
    )
}

fn c2_crosstalk() -> Verdict {
    let opts = CompileOptions::default();
    let static_sites: Vec<usize> = (0..39).step_by(2).collect();
    let mut reference: Option<Vec<u64>> = None;
    for i in 0..200 {
        let dx = 2.0 * LAMBDA_NM * i as f64 / 199.0;
        let seq = build_parity_addressing(39, dx, &opts).unwrap();
        let p = Simulation::new(&seq, &Environment::noiseless()).unwrap().noiseless_probabilities();
        let bits: Vec<u64> = static_sites.iter().map(|&s| p[s].to_bits()).collect();
        match &reference {
            None => reference = Some(bits),
            Some(r) if *r != bits => return verdict(false, format!("static populations change at dx = {dx} nm")),
            _ => {}
        }
    }
    verdict(true, "20 static sites bitwise identical across 200 move distances")
}

fn c3_inversion() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..=20_000 {
        let theta = if i == 0 { PI } else { -PI + TAU * i as f64 / 20_000.0 };
        let r = ShotRecord::new(0.0, (1.0 + theta.cos()) / 2.0, (1.0 + theta.sin()) / 2.0, 0, 0).unwrap();
        worst = worst.max(wrap_phase(estimate_phase(&r).unwrap() - theta).abs());
    }
    let mut runner = runner_with(PropConfig { cases: 2000, failure_persistence: None, ..PropConfig::default() });
    let inversion = runner.run(&(-PI..=PI), |theta| {
        let r = ShotRecord::new(0.0, (1.0 + theta.cos()) / 2.0, (1.0 + theta.sin()) / 2.0, 0, 0).unwrap();
        prop_assert!(wrap_phase(estimate_phase(&r).unwrap() - theta).abs() < 1e-12);
        Ok(())
    });
    // θ0 and π − θ0 give the same single-basis population.
    let aliasing = runner.run(&(-FRAC_PI_2 + 1e-3..FRAC_PI_2 - 1e-3), |t0| {
        let a = estimate_single_basis((1.0 + t0.sin()) / 2.0);
        let b = estimate_single_basis((1.0 + (PI - t0).sin()) / 2.0);
        prop_assert!((a - b).abs() < 1e-12 && (a - t0).abs() < 1e-9);
        prop_assert!(wrap_phase(b - (PI - t0)).abs() > 1e-3);
        Ok(())
    });
    let elapsed = start.elapsed();
    let ok = worst < 1e-12 && inversion.is_ok() && aliasing.is_ok() && elapsed < Duration::from_secs(1);
    verdict(ok, format!("max inversion error {worst:.1e}, aliasing shown, {elapsed:.2?}"))
}

fn c4_tmax_gain() -> Verdict {
    let start = Instant::now();
    let fit = PhaseFit::new(BETA, ALPHA, 0.0).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for eps in [1e-4, 1e-2, 0.1] {
        let ratio = t_max(eps, &fit, DynamicRange::DUAL_QUADRATURE).unwrap()
            / t_max(eps, &fit, DynamicRange::SINGLE_QUADRATURE).unwrap();
        // T_max ∝ B^{1/α}, so the ratio is 2^{1/α}.
        let oracle = 2f64.powf(1.0 / ALPHA);
        ok &= (ratio - oracle).abs() < 1e-9 && (ratio - 3.24).abs() <= 0.02;
        detail = format!("ratio {ratio:.4}");
    }
    let g = metrological_gain_db(ALPHA).unwrap();
    let g_ratio = gain_db_from_tmax_ratio(2f64.powf(1.0 / ALPHA));
    let oracle = 10.0 * 2f64.powf(1.0 / ALPHA).log10() / 2.0;
    ok &= (g - oracle).abs() < 1e-12 && (g_ratio - oracle).abs() < 1e-12 && (g - 2.55).abs() <= 0.05;
    let elapsed = start.elapsed();
    verdict(ok && elapsed < Duration::from_secs(1), format!("{detail}, gain {g:.4} dB, {elapsed:.2?}"))
}

fn c5_noise_pipeline(tmp: &Path) -> Verdict {
    let cfg = config("dual_quadrature.toml");
    let injected = cfg.noise.as_ref().map(|n| (n.beta, n.alpha)).unwrap();
    let points = cfg.time_grid.as_ref().unwrap().resolve().unwrap().len();
    let start = Instant::now();
    let done = run_in(cfg, tmp);
    let (beta, alpha) = (number(&done.output.report, "beta"), number(&done.output.report, "alpha"));
    let (eb, ea) = ((beta / injected.0 - 1.0).abs(), (alpha / injected.1 - 1.0).abs());
    verdict(
        eb < 0.05 && ea < 0.05 && points == 50 && done.out_dir.join("results.csv").exists(),
        format!(
            "beta {beta:.4} (injected {:.4}, {:.1}%), alpha {alpha:.4} (injected {}, {:.1}%), {points} times x 500 shots in {:.2?}",
            injected.0,
            100.0 * eb,
            injected.1,
            100.0 * ea,
            start.elapsed()
        ),
    )
}

fn c6_folded() -> Verdict {
    let mut runner = runner_with(PropConfig { cases: 24, failure_persistence: None, ..PropConfig::default() });
    let strategy = (0.1f64..=0.7, prop::sample::select(vec![FRAC_PI_2, PI]), any::<u64>());
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner.run(&strategy, |(ratio, b, seed)| {
        let sigma = ratio * b;
        // Box-Muller draws folded into [−B, B].
        let mut r = rng::stream(seed, &[]);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| {
                let (u1, u2): (f64, f64) = (1.0 - r.random::<f64>(), r.random());
                let g = sigma * (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos();
                (g + b).rem_euclid(2.0 * b) - b
            })
            .collect();
        let fit = fit_folded_gaussian(&xs, b).unwrap();
        let err = (fit / sigma - 1.0).abs();
        worst.set(worst.get().max(err));
        prop_assert!(err < 0.05, "sigma/B {ratio}, B {b}: fitted {fit}, true {sigma}");
        Ok(())
    });
    verdict(result.is_ok(), format!("24 cases, n = 1e4, worst relative error {:.2}%", 100.0 * worst.get()))
}

fn c7_local_dd(tmp: &Path) -> Verdict {
    let start = Instant::now();
    let done = run_in(config("local_dd.toml"), tmp);
    let r = &done.output.report;
    let fr: Vec<f64> = (0..3).map(|m| number(r, &format!("effective_fraction[m{m}]"))).collect();
    let ratio: Vec<f64> = (0..3).map(|m| number(r, &format!("frequency_ratio[m{m}]"))).collect();
    let exact = fr == [1.0, 0.5, 0.25];
    let within = (0..3).all(|m| (ratio[m] / 2f64.powi(m as i32) - 1.0).abs() < 0.01);
    let elapsed = start.elapsed();
    verdict(
        exact && within && elapsed < Duration::from_secs(30),
        format!("fractions {fr:?}, ratios 1:{:.4}:{:.4}, {elapsed:.2?}", ratio[1], ratio[2]),
    )
}

fn c8_kernel(tmp: &Path) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut fractions_ok = true;
    for mode in [FlipMode::Composite, FlipMode::Ideal] {
        let mut cfg = config("kernel.toml");
        cfg.timing.as_mut().unwrap().flip_mode = mode;
        let done = run_in(cfg, &tmp.join(mode.as_str()));
        let r = &done.output.report;
        worst = worst.max(number(r, "segment_sum_max_error_rad"));
        for m in 0..3 {
            fractions_ok &= number(r, &format!("phase_fraction[m{m}]")) == 0.5f64.powi(m)
                && number(r, &format!("effective_fraction[m{m}]")) == 0.5f64.powi(m);
        }
    }
    verdict(worst < 1e-9 && fractions_ok, format!("max segment-sum deviation {worst:.1e} rad, fractions 2^-m exact"))
}

fn c9_unwrap() -> Verdict {
    for m_count in 2..=4usize {
        let half = 2f64.powi(m_count as i32 - 1) * PI;
        let steps = (2.0 * half / 1e-3).round() as i64;
        for i in 1..=steps {
            let theta = -half + 2.0 * half * i as f64 / steps as f64;
            let est: Vec<EnsembleEstimate> = (0..m_count)
                .rev()
                .map(|m| EnsembleEstimate::new(m, wrap_phase(theta / 2f64.powi(m as i32)), 0))
                .collect();
            let u = cascaded_unwrap(&est).unwrap();
            if (u.theta_full - theta).abs() > 1e-9 {
                return verdict(false, format!("M={m_count}: theta {theta} unwrapped to {}", u.theta_full));
            }
        }
    }
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut ok = true;
    for (k, sigma) in [1.0, 1.5, 2.5].into_iter().enumerate() {
        let est = slip_probability_multi(sigma, 1, &[0.0], 100_000, 900 + k as u64).unwrap();
        let want = erfc_oracle(PI / (2f64.sqrt() * sigma));
        let z = (est.probability - want) / est.stderr;
        ok &= z.abs() < 3.0;
        detail.push(format!("sigma {sigma}: {:.5} vs {want:.5} ({z:+.2} SE)", est.probability));
    }
    let elapsed = start.elapsed();
    verdict(
        ok && elapsed < Duration::from_secs(60),
        format!("exhaustive M=2..4 exact; M=1 {}; {elapsed:.2?}", detail.join(", ")),
    )
}

fn c10_tomography(tmp: &Path) -> Verdict {
    let mut ideal = config("tomography.toml");
    ideal.noise.as_mut().unwrap().beta = 0.0;
    ideal.noise.as_mut().unwrap().pulse_infidelity_per_pi = 0.0;
    ideal.spam.as_mut().unwrap().preset = Some("perfect".into());
    let done = run_in(ideal, &tmp.join("ideal"));
    let r = &done.output.report;
    let labels = ["+X", "-X", "+Y", "-Y", "+Z", "-Z"];
    let ideal_ok = labels.iter().all(|l| (number(r, &format!("fidelity[{l}]")) - 1.0).abs() < 1e-12);
    let done = run_in(config("tomography.toml"), &tmp.join("measured"));
    let mean = number(&done.output.report, "mean_fidelity");
    verdict(
        ideal_ok && (0.975..=0.995).contains(&mean),
        format!("noise-free fidelities all 1.000: {ideal_ok}; with SPAM mean fidelity {mean:.4}"),
    )
}

fn c11_error_budget(tmp: &Path) -> Verdict {
    let done = run_in(config("tomography.toml"), tmp);
    let r = &done.output.report;
    let (x_pi, shift) = (number(r, "x_pi_fidelity"), number(r, "shift_fidelity"));
    verdict(
        (x_pi - 0.9956).abs() <= 0.003 && (shift - 0.9984).abs() <= 0.003,
        format!(
            "global X(pi) {x_pi:.5} (reference 0.9956, diff {:+.5}); shift {shift:.5} (reference 0.9984, diff {:+.5})",
            x_pi - 0.9956,
            shift - 0.9984
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name);
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("parity addressing period", Box::new(move || c1_parity_period(&dir("c1")))),
        ("crosstalk invariant", Box::new(c2_crosstalk)),
        ("dual-quadrature inversion", Box::new(c3_inversion)),
        ("T_max ratio and gain", Box::new(c4_tmax_gain)),
        ("end-to-end noise pipeline", Box::new(move || c5_noise_pipeline(&dir("c5")))),
        ("folded-Gaussian estimator", Box::new(c6_folded)),
        ("local DD ratios", Box::new(move || c7_local_dd(&dir("c7")))),
        ("kernel schedule", Box::new(move || c8_kernel(&dir("c8")))),
        ("cascaded unwrap", Box::new(c9_unwrap)),
        ("tomography", Box::new(move || c10_tomography(&dir("c10")))),
        ("error-budget consistency", Box::new(move || c11_error_budget(&dir("c11")))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<28} {}  {}", i + 1, name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
