//! Ramsey fringes with a site-resolved frame-rotation pattern.

use std::f64::consts::{FRAC_PI_4, PI};

use multiclock::estimation::wrap_phase;
use multiclock::fit::fit_sinusoid_at;
use multiclock::sequence::build_phase_pattern;
use multiclock::simulate::Detuning;

use super::{missing, Context};
use crate::error::HarnessResult;

pub(super) fn pattern_phases(preset: Option<&str>, explicit: Option<&Vec<f64>>, n: Option<usize>) -> Vec<f64> {
    if let Some(p) = explicit {
        return p.clone();
    }
    let n = n.unwrap_or(0);
    match preset {
        Some("parity") => (0..n).map(|j| if j % 2 == 1 { PI } else { 0.0 }).collect(),
        _ => (0..n).map(|j| j as f64 * FRAC_PI_4).collect(),
    }
}

pub(super) fn run(ctx: &mut Context) -> HarnessResult<()> {
    let section = ctx.config.pattern.as_ref().ok_or_else(|| missing("[pattern]"))?;
    let phi = pattern_phases(section.preset.as_deref(), section.phases_rad.as_ref(), ctx.v.array_size);
    let detuning = section.detuning_hz;
    ctx.report.param("pattern.phases_rad", &phi);
    ctx.report.param("pattern.detuning_hz", detuning);
    let name = ctx.name();
    let shots = ctx.shots();
    let times = ctx.v.times.clone();
    let mut curves = vec![Vec::with_capacity(times.len()); phi.len()];
    for (i, &t) in times.iter().enumerate() {
        let seq = build_phase_pattern(&phi, t, &ctx.v.compile)?;
        ctx.keep_sequence(&seq);
        let sim = ctx.simulation(&seq, Detuning::Constant(detuning))?;
        let counts = sim.count_excited(ctx.point_seed(i), shots);
        for (j, &k) in counts.iter().enumerate() {
            ctx.table.population(name, "populations", &format!("site-{j}"), t, k, shots);
            curves[j].push(k as f64 / shots as f64);
        }
    }

    if detuning == 0.0 {
        ctx.report.warn("zero detuning: fringes are flat, site phases not fitted");
        return Ok(());
    }
    // P_j = (1 + cos(2πδt − φ_j))/2, so the fitted phase of site j is −φ_j
    // up to a common offset.
    let f = detuning * 1e-6;
    let fitted: Vec<f64> = curves.iter().map(|c| fit_sinusoid_at(&times, c, f).phase).collect();
    let mut worst: f64 = 0.0;
    let mut measured = Vec::with_capacity(phi.len());
    for j in 0..phi.len() {
        let got = wrap_phase(fitted[0] - fitted[j]);
        let want = wrap_phase(phi[j] - phi[0]);
        worst = worst.max(wrap_phase(got - want).abs());
        ctx.table.value(name, "site_phase", "measured", j as f64, got);
        ctx.table.value(name, "site_phase", "programmed", j as f64, want);
        measured.push(got);
    }
    ctx.report.result("site_phases_rad", measured);
    ctx.report.result("max_phase_error_rad", worst);
    Ok(())
}
