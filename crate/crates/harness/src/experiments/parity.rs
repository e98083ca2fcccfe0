//! Odd sites moved by `Δx` between two quarter-turns, even sites static.

use multiclock::fit::{fit_sinusoid, fit_sinusoid_at};
use multiclock::sequence::build_parity_addressing;
use multiclock::simulate::Detuning;

use super::{missing, pooled, Context};
use crate::error::HarnessResult;

pub(super) const DEFAULT_POINTS: usize = 200;

pub(super) fn run(ctx: &mut Context) -> HarnessResult<()> {
    let n = ctx.v.array_size.ok_or_else(|| missing("array_size"))?;
    let lambda = ctx.v.compile.drive.wavelength_nm;
    let grid: Vec<f64> = if ctx.v.parity_grid.is_empty() {
        (0..DEFAULT_POINTS).map(|i| 2.0 * lambda * i as f64 / (DEFAULT_POINTS - 1) as f64).collect()
    } else {
        ctx.v.parity_grid.clone()
    };
    ctx.report.param("parity.delta_x_points", grid.len());
    ctx.report.param("parity.delta_x_min_nm", grid.iter().cloned().fold(f64::INFINITY, f64::min));
    ctx.report.param("parity.delta_x_max_nm", grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max));

    let shifted: Vec<usize> = (1..n).step_by(2).collect();
    let fixed: Vec<usize> = (0..n).step_by(2).collect();
    let name = ctx.name();
    let shots = ctx.shots();
    let mut shifted_p = Vec::with_capacity(grid.len());
    let mut static_p = Vec::with_capacity(grid.len());
    let mut static_exact: Option<Vec<u64>> = None;
    let mut static_bitwise = true;
    for (i, &dx) in grid.iter().enumerate() {
        let seq = build_parity_addressing(n, dx, &ctx.v.compile)?;
        if i == grid.len() / 2 {
            ctx.keep_sequence(&seq);
        }
        let sim = ctx.simulation(&seq, Detuning::Constant(0.0))?;
        let ideal = sim.noiseless_probabilities();
        let exact: Vec<u64> = fixed.iter().map(|&s| ideal[s].to_bits()).collect();
        match &static_exact {
            None => static_exact = Some(exact),
            Some(first) => static_bitwise &= *first == exact,
        }
        let counts = sim.count_excited(ctx.point_seed(i), shots);
        let (k, m) = pooled(&counts, &shifted, shots);
        ctx.table.population(name, "populations", "shifted", dx, k, m);
        shifted_p.push(k as f64 / m as f64);
        let (k, m) = pooled(&counts, &fixed, shots);
        ctx.table.population(name, "populations", "static", dx, k, m);
        static_p.push(k as f64 / m as f64);
    }
    ctx.report.result("static_populations_bitwise_constant", static_bitwise);

    if grid.len() < 4 {
        ctx.report.warn("parity sweep has fewer than 4 points; no period fit");
        return Ok(());
    }
    match fit_sinusoid(&grid, &shifted_p, Some(4.0 / lambda)) {
        Ok(fit) => {
            let period = fit.period();
            ctx.report.result("fitted_period_nm", period);
            ctx.report.result("period_relative_error", (period - lambda) / lambda);
            ctx.report.result("shifted_amplitude", fit.amplitude);
            let stat = fit_sinusoid_at(&grid, &static_p, fit.frequency);
            ctx.report.result("static_amplitude", stat.amplitude);
            ctx.report.result("crosstalk", if fit.amplitude > 0.0 { stat.amplitude / fit.amplitude } else { f64::NAN });
            for (&dx, _) in grid.iter().zip(&shifted_p) {
                ctx.table.value(name, "fit", "shifted", dx, fit.eval(dx));
            }
        }
        Err(e) => ctx.report.warn(format!("period fit failed: {e}")),
    }
    Ok(())
}
