//! Slip probability of cascaded multi-ensemble estimation.

use multiclock::estimation::{phase_slip_probability, DynamicRange};
use multiclock::multi_ensemble::{ideal_stability_gain, slip_probability_multi};
use multiclock::noise::qpn_sigma_oracle;
use multiclock::rng;

use super::{missing, Context};
use crate::error::HarnessResult;

pub(super) fn run(ctx: &mut Context) -> HarnessResult<()> {
    let section = ctx.config.slip.clone().ok_or_else(|| missing("[slip]"))?;
    let stage_sigma = match (section.stage_sigma_rad, section.atoms_per_quadrature) {
        (Some(s), _) => s,
        (None, Some(n)) => qpn_sigma_oracle(n, 1.0, 20_000, rng::derive_seed(ctx.v.seed, &[rng::label("qpn-oracle")]))?,
        (None, None) => 0.0,
    };
    ctx.report.param("slip.ensembles", &section.ensembles);
    ctx.report.param("slip.trials", section.trials);
    ctx.report.param("slip.atoms_per_quadrature", section.atoms_per_quadrature);
    ctx.report.result("stage_sigma_rad", stage_sigma);
    let name = ctx.name();
    // One stream for every (M, σ) so that curves share random numbers.
    let seed = rng::derive_seed(ctx.v.seed, &[rng::label(name)]);
    let sigmas = ctx.v.slip_sigmas.clone();
    let mut curves: Vec<Vec<f64>> = Vec::new();
    for &m in &section.ensembles {
        let mut curve = Vec::with_capacity(sigmas.len());
        for &s in &sigmas {
            let est = slip_probability_multi(s, m, &vec![stage_sigma; m], section.trials, seed)?;
            ctx.table.push(crate::table::ResultRow {
                experiment: name.into(),
                panel: "slip".into(),
                series: format!("M={m}"),
                x: s,
                x2: None,
                value: est.probability,
                stderr: Some(est.stderr),
                n: Some(est.trials),
            });
            curve.push(est.probability);
        }
        ctx.report.result(&format!("ideal_stability_gain[M={m}]"), ideal_stability_gain(m)?);
        curves.push(curve);
    }
    for &s in &sigmas {
        let p = if s > 0.0 { phase_slip_probability(s, DynamicRange::DUAL_QUADRATURE)? } else { 0.0 };
        ctx.table.value(name, "slip", "erfc", s, p);
    }
    let mut order: Vec<(usize, &Vec<f64>)> = section.ensembles.iter().copied().zip(curves.iter()).collect();
    order.sort_by_key(|c| c.0);
    for w in order.windows(2) {
        if w[0].1.iter().zip(w[1].1).any(|(a, b)| b > a) {
            ctx.report.warn(format!("slip probability increases from M={} to M={}", w[0].0, w[1].0));
        }
    }
    Ok(())
}
