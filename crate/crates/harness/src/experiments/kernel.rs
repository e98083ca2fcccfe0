//! Kernel schedule under a detuning that changes from kernel to kernel.

use std::f64::consts::TAU;

use multiclock::estimation::{estimate_phase_from_contrasts, wrap_phase, Quadrature};
use multiclock::sequence::{build_kernel_schedule, effective_phase_fraction, EnsembleLayout, Instruction};
use multiclock::simulate::Detuning;

use super::{missing, pooled, Context};
use crate::error::HarnessResult;

pub(super) fn run(ctx: &mut Context) -> HarnessResult<()> {
    let section = ctx.config.kernel.clone().ok_or_else(|| missing("[kernel]"))?;
    let n = ctx.v.array_size.ok_or_else(|| missing("array_size"))?;
    let m_count = section.ensembles;
    let k = section.kernels;
    let layout = EnsembleLayout::blocks(n, m_count)?;
    let hz: Vec<f64> = if section.detuning_hz.len() == 1 { vec![section.detuning_hz[0]; k] } else { section.detuning_hz.clone() };
    ctx.report.param("kernel.ensembles", m_count);
    ctx.report.param("kernel.kernels", k);
    ctx.report.param("kernel.detuning_hz", &hz);
    let name = ctx.name();
    let shots = ctx.shots();
    let mut worst: f64 = 0.0;
    for (i, &tau) in ctx.v.times.clone().iter().enumerate() {
        let (seq, schedule) = build_kernel_schedule(&layout, k, tau, &ctx.v.compile)?;
        ctx.keep_sequence(&seq);
        // Kernels start at the centre of the opening quarter-turn.
        let start_us = match seq.instructions.first() {
            Some(ins @ Instruction::GlobalPulse { .. }) => ins.centre_offset(),
            _ => 0.0,
        };
        let detuning = Detuning::Piecewise { start_us, segment_us: tau, hz: hz.clone() };
        let sim = ctx.simulation(&seq, detuning)?;
        let exact = sim.noiseless_probabilities();
        let counts = sim.count_excited(ctx.point_seed(i), shots);
        for m in 0..m_count {
            let xs = layout.sites_in(m, Quadrature::X);
            let ys = layout.sites_in(m, Quadrature::Y);
            let oracle: f64 = hz.iter().map(|h| TAU * h * tau * 1e-6 * schedule.phase_fraction(m)).sum();
            let ideal = estimate_phase_from_contrasts(2.0 * exact[xs[0]] - 1.0, 2.0 * exact[ys[0]] - 1.0)?;
            worst = worst.max(wrap_phase(ideal - oracle).abs());
            ctx.table.value(name, "phase", &format!("m{m}-segment-sum"), tau, wrap_phase(oracle));
            ctx.table.value(name, "phase", &format!("m{m}-noiseless"), tau, ideal);
            let (kx, nx) = pooled(&counts, &xs, shots);
            let (ky, ny) = pooled(&counts, &ys, shots);
            let (px, py) = (kx as f64 / nx as f64, ky as f64 / ny as f64);
            if let Ok(p) = estimate_phase_from_contrasts(2.0 * px - 1.0, 2.0 * py - 1.0) {
                ctx.table.value(name, "phase", &format!("m{m}"), tau, p);
            }
            if i == 0 {
                ctx.report.result(&format!("phase_fraction[m{m}]"), schedule.phase_fraction(m));
                ctx.report.result(&format!("effective_fraction[m{m}]"), effective_phase_fraction(&seq, xs[0])?);
            }
        }
    }
    ctx.report.result("segment_sum_max_error_rad", worst);
    if worst > 1e-6 && ctx.v.compile.timing.finite_pulses {
        ctx.report.warn("finite flip durations add detuning-dependent phase; the segment sum is exact only with instantaneous timing");
    }
    Ok(())
}
