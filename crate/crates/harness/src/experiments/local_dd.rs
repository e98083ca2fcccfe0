//! Three ensembles with local dynamical decoupling: phase accumulation in
//! the ratio 1 : 1/2 : 1/4.

use multiclock::estimation::{estimate_phase_from_contrasts, Quadrature};
use multiclock::fit::fit_sinusoid;
use multiclock::sequence::{build_local_dd, effective_phase_fraction, EnsembleLayout};
use multiclock::simulate::Detuning;

use super::{missing, pooled, Context};
use crate::error::HarnessResult;

pub(super) fn run(ctx: &mut Context) -> HarnessResult<()> {
    let section = ctx.config.local_dd.clone().ok_or_else(|| missing("[local_dd]"))?;
    let n = ctx.v.array_size.ok_or_else(|| missing("array_size"))?;
    let layout = EnsembleLayout::blocks(n, 3)?;
    let hz = section.detuning_hz;
    ctx.report.param("local_dd.detuning_hz", hz);
    let name = ctx.name();
    let shots = ctx.shots();
    let times = ctx.v.times.clone();
    let mut px = vec![Vec::with_capacity(times.len()); 3];
    let mut last = None;
    for (i, &t) in times.iter().enumerate() {
        let seq = build_local_dd(&layout, t, &ctx.v.compile)?;
        ctx.keep_sequence(&seq);
        let sim = ctx.simulation(&seq, Detuning::Constant(hz))?;
        let counts = sim.count_excited(ctx.point_seed(i), shots);
        for m in 0..3 {
            let (kx, nx) = pooled(&counts, &layout.sites_in(m, Quadrature::X), shots);
            let (ky, ny) = pooled(&counts, &layout.sites_in(m, Quadrature::Y), shots);
            ctx.table.population(name, "populations", &format!("m{m}-X"), t, kx, nx);
            ctx.table.population(name, "populations", &format!("m{m}-Y"), t, ky, ny);
            let (pxm, pym) = (kx as f64 / nx as f64, ky as f64 / ny as f64);
            px[m].push(pxm);
            if let Ok(phase) = estimate_phase_from_contrasts(2.0 * pxm - 1.0, 2.0 * pym - 1.0) {
                ctx.table.value(name, "phase", &format!("m{m}"), t, phase);
            }
        }
        last = Some(seq);
    }

    let seq = last.ok_or_else(|| missing("[time_grid]"))?;
    for m in 0..3 {
        let site = layout.sites(m)[0];
        let f = effective_phase_fraction(&seq, site)?;
        ctx.report.result(&format!("effective_fraction[m{m}]"), f);
    }
    if hz == 0.0 {
        ctx.report.warn("zero detuning: no fringes to compare");
        return Ok(());
    }
    // Fringe frequency in Hz; the search band covers the fastest ensemble.
    let max_f = 4.0 * hz.abs() * 1e-6;
    let mut freqs = Vec::new();
    for (m, curve) in px.iter().enumerate() {
        match fit_sinusoid(&times, curve, Some(max_f)) {
            Ok(fit) => {
                ctx.report.result(&format!("fringe_frequency_hz[m{m}]"), fit.frequency * 1e6);
                freqs.push(fit.frequency);
            }
            Err(e) => {
                ctx.report.warn(format!("fringe fit failed for ensemble {m}: {e}"));
                return Ok(());
            }
        }
    }
    for m in 0..3 {
        ctx.report.result(&format!("frequency_ratio[m{m}]"), freqs[0] / freqs[m]);
        ctx.table.value(name, "frequency_ratio", "measured", m as f64, freqs[0] / freqs[m]);
        ctx.table.value(name, "frequency_ratio", "programmed", m as f64, 2f64.powi(m as i32));
    }
    Ok(())
}
