//! Single-ensemble Ramsey with dual-quadrature readout: per-shot phases,
//! deviation statistics, noise-growth fit and the derived slip probability,
//! maximum interrogation time and gain.

use std::f64::consts::{PI, TAU};

use multiclock::estimation::{
    estimate_phase, fit_folded_gaussian, fit_sigma_growth, gain_db_from_tmax_ratio, mean_phase_curve,
    metrological_gain_db, phase_deviation, phase_slip_probability, t_max, wrap_phase, DynamicRange, PhaseFit,
    Quadrature, ShotRecord, ShotRow, ShotTable,
};
use multiclock::noise::qpn_sigma_oracle;
use multiclock::rng;
use multiclock::sequence::{build_dual_quadrature, EnsembleLayout};
use multiclock::simulate::Detuning;

use super::{missing, Context};
use crate::error::HarnessResult;

const RANGES: [(&str, DynamicRange); 2] =
    [("B=pi/2", DynamicRange::SINGLE_QUADRATURE), ("B=pi", DynamicRange::DUAL_QUADRATURE)];

fn default_epsilon() -> Vec<f64> {
    (0..31).map(|i| 10f64.powf(-5.0 + 4.5 * i as f64 / 30.0)).collect()
}

pub(super) fn run(ctx: &mut Context) -> HarnessResult<()> {
    let section = ctx.config.dual_quadrature.clone().ok_or_else(|| missing("[dual_quadrature]"))?;
    let n = ctx.v.array_size.ok_or_else(|| missing("array_size"))?;
    let layout = EnsembleLayout::blocks(n, 1)?;
    let x_sites = layout.sites_in(0, Quadrature::X);
    let y_sites = layout.sites_in(0, Quadrature::Y);
    let unit = ctx.v.noise.laser.time_unit_us;
    let detuning = section.detuning_hz;
    let shots = ctx.shots();
    let name = ctx.name();
    ctx.report.param("dual_quadrature.detuning_hz", detuning);
    ctx.report.param("dual_quadrature.mean_phase", &section.mean_phase);
    ctx.report.param("dual_quadrature.histogram_bins", section.histogram_bins);
    ctx.report.param("dual_quadrature.atoms_per_quadrature", [x_sites.len(), y_sites.len()]);
    ctx.report.param("time_unit", format!("{unit} us"));

    // Per-shot records with times in laser-noise units.
    let mut records: Vec<ShotRecord> = Vec::with_capacity(ctx.v.times.len() * shots as usize);
    let mut rows = Vec::new();
    let times_us = ctx.v.times.clone();
    for (i, &t_us) in times_us.iter().enumerate() {
        let seq = build_dual_quadrature(&layout, t_us, &ctx.v.compile)?;
        if i == 0 {
            ctx.keep_sequence(&seq);
        }
        let sim = ctx.simulation(&seq, Detuning::Constant(detuning))?;
        let seed = ctx.point_seed(i);
        let t = t_us / unit;
        let (mut kx_tot, mut ky_tot) = (0u64, 0u64);
        for shot in 0..shots {
            let out = sim.run_shot(seed, shot);
            let kx = x_sites.iter().filter(|&&s| out.outcomes[s]).count() as u64;
            let ky = y_sites.iter().filter(|&&s| out.outcomes[s]).count() as u64;
            kx_tot += kx;
            ky_tot += ky;
            records.push(ShotRecord::from_counts(t, kx, x_sites.len() as u64, ky, y_sites.len() as u64)?);
            if section.write_shot_table {
                for site in 0..n {
                    rows.push(ShotRow {
                        t,
                        shot,
                        site,
                        ensemble: 0,
                        quadrature: layout.quadrature_of(site),
                        outcome: out.outcomes[site],
                    });
                }
            }
        }
        ctx.table.population(name, "mean_populations", "X", t, kx_tot, shots * x_sites.len() as u64);
        ctx.table.population(name, "mean_populations", "Y", t, ky_tot, shots * y_sites.len() as u64);
    }
    if section.write_shot_table {
        ctx.shot_table = Some(ShotTable::new(rows));
    }

    // Mean phase per time.
    let times: Vec<f64> = times_us.iter().map(|t| t / unit).collect();
    let theta_mean: Vec<f64> = if section.mean_phase == "known" {
        times_us.iter().map(|t| wrap_phase(TAU * detuning * t * 1e-6)).collect()
    } else {
        match mean_phase_curve(&records) {
            Ok(curve) => {
                ctx.report.result("mean_curve.frequency_per_unit", curve.frequency);
                ctx.report.result("mean_curve.decay_rate", curve.decay_rate);
                ctx.report.result("mean_curve.decay_shape", curve.decay_shape);
                ctx.report.result("mean_curve.amplitude", [curve.amplitude_x, curve.amplitude_y]);
                for &t in &times {
                    ctx.table.value(name, "mean_fit", "X", t, curve.p_x(t));
                    ctx.table.value(name, "mean_fit", "Y", t, curve.p_y(t));
                }
                times.iter().map(|&t| curve.theta_at(t)).collect()
            }
            Err(e) => {
                ctx.report.warn(format!("mean phase fit failed ({e}); using the programmed detuning"));
                times_us.iter().map(|t| wrap_phase(TAU * detuning * t * 1e-6)).collect()
            }
        }
    };

    // Deviations, per-time spread and histograms.
    let bins = section.histogram_bins;
    let width = TAU / bins as f64;
    let mut spreads = Vec::with_capacity(times.len());
    let per_time = shots as usize;
    for (i, &t) in times.iter().enumerate() {
        ctx.table.value(name, "mean_phase", "theta_mean", t, theta_mean[i]);
        let block = &records[i * per_time..(i + 1) * per_time];
        let mut devs = Vec::with_capacity(per_time);
        for r in block {
            match estimate_phase(r) {
                Ok(theta) => devs.push(phase_deviation(theta, theta_mean[i])),
                Err(_) => devs.push(0.0),
            }
        }
        let mut hist = vec![0u64; bins];
        for &d in &devs {
            let b = (((d + PI) / width).floor() as usize).min(bins - 1);
            hist[b] += 1;
        }
        let series = format!("t={t}");
        for (b, &c) in hist.iter().enumerate() {
            let lo = -PI + b as f64 * width;
            ctx.table.push(crate::table::ResultRow {
                experiment: name.into(),
                panel: "histogram".into(),
                series: series.clone(),
                x: lo,
                x2: Some(lo + width),
                value: c as f64 / (devs.len() as f64 * width),
                stderr: None,
                n: Some(c),
            });
        }
        match fit_folded_gaussian(&devs, PI) {
            Ok(s) => {
                // Large-sample stderr of a Gaussian width.
                let se = s / (2.0 * devs.len() as f64).sqrt();
                ctx.table.push(crate::table::ResultRow {
                    experiment: name.into(),
                    panel: "sigma".into(),
                    series: "measured".into(),
                    x: t,
                    x2: None,
                    value: s,
                    stderr: Some(se),
                    n: Some(devs.len() as u64),
                });
                spreads.push((t, s));
            }
            Err(e) => ctx.report.warn(format!("folded fit failed at t={t}: {e}")),
        }
    }

    let sigma_qpn = match section.sigma_qpn_rad {
        Some(s) => s,
        None => {
            let seed = rng::derive_seed(ctx.v.seed, &[rng::label("qpn-oracle")]);
            qpn_sigma_oracle(x_sites.len().min(y_sites.len()) as u64, 1.0, section.qpn_trials, seed)?
        }
    };
    ctx.report.result("sigma_qpn_rad", sigma_qpn);

    let fit = match fit_sigma_growth(&spreads, sigma_qpn) {
        Ok(f) => f,
        Err(e) => {
            ctx.report.warn(format!("noise-growth fit failed: {e}"));
            return Ok(());
        }
    };
    if !fit.alpha_identifiable {
        ctx.report.warn("noise growth is too small to identify alpha");
    }
    let epsilon = if ctx.v.epsilon.is_empty() { default_epsilon() } else { ctx.v.epsilon.clone() };
    report_fit(ctx, &fit, &times, &epsilon)?;
    Ok(())
}

fn report_fit(ctx: &mut Context, fit: &PhaseFit, times: &[f64], epsilon: &[f64]) -> HarnessResult<()> {
    let name = ctx.name();
    ctx.report.result("beta", fit.beta);
    ctx.report.result("alpha", fit.alpha);
    ctx.report.result("beta_over_pi", fit.beta / PI);
    ctx.report.result("beta_stderr", fit.beta_stderr());
    ctx.report.result("alpha_stderr", fit.alpha_stderr());
    for &t in times {
        ctx.table.value(name, "sigma", "fit_total", t, fit.total_sigma(t));
        ctx.table.value(name, "sigma", "fit_laser", t, fit.laser_sigma(t));
        for (label, range) in RANGES {
            let eps = phase_slip_probability(fit.laser_sigma(t), range).unwrap_or(0.0);
            ctx.table.value(name, "epsilon", label, t, eps);
        }
    }
    match metrological_gain_db(fit.alpha) {
        Ok(g) => ctx.report.result("gain_db", g),
        Err(e) => ctx.report.warn(format!("gain undefined: {e}")),
    }
    if fit.beta > 0.0 {
        for &eps in epsilon {
            let mut pair = [0.0; 2];
            for (k, (label, range)) in RANGES.iter().enumerate() {
                pair[k] = t_max(eps, fit, *range)?;
                ctx.table.value(name, "tmax", label, eps, pair[k]);
            }
            ctx.table.value(name, "tmax", "ratio", eps, pair[1] / pair[0]);
        }
        let e0 = epsilon.first().copied().unwrap_or(0.01);
        let ratio = t_max(e0, fit, DynamicRange::DUAL_QUADRATURE)? / t_max(e0, fit, DynamicRange::SINGLE_QUADRATURE)?;
        ctx.report.result("tmax_ratio", ratio);
        ctx.report.result("gain_db_from_tmax_ratio", gain_db_from_tmax_ratio(ratio));
        for (label, range) in RANGES {
            ctx.report.result(&format!("tmax_at_1pct[{label}]"), t_max(0.01, fit, range)?);
        }
    } else {
        ctx.report.warn("fitted beta is zero; T_max is unbounded");
    }
    Ok(())
}
