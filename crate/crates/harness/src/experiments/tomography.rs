//! Six cardinal states prepared with quarter-turns and moves, read out in
//! three bases. Also reports the global `X(π)` and the `Z(2π)` shift
//! fidelities under the same error budget.

use std::f64::consts::PI;

use multiclock::noise::SpamParams;
use multiclock::qubit::{state_fidelity, tomography_reconstruct, Basis, DensityMatrix};
use multiclock::sequence::{
    build_cardinal_array, build_cardinal_states, build_parity_addressing, with_measurement, CardinalState,
    Instruction, PulseSequence,
};
use multiclock::simulate::{Detuning, Simulation};

use super::Context;
use crate::error::HarnessResult;

const BASES: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

/// Sampled excited fraction and its expectation (laser noise averaged over
/// the same shots, SPAM applied analytically) for every site.
fn measure(sim: &Simulation, seed: u64, shots: u64, spam: &SpamParams) -> (Vec<u64>, Vec<f64>) {
    let n = sim.n_sites();
    let mut counts = vec![0u64; n];
    let mut expected = vec![0.0; n];
    for shot in 0..shots {
        let out = sim.run_shot(seed, shot);
        for j in 0..n {
            counts[j] += out.outcomes[j] as u64;
            expected[j] += out.probabilities[j];
        }
    }
    let expected = expected.into_iter().map(|p| spam.measured_probability(p / shots as f64)).collect();
    (counts, expected)
}

/// Undo the linear SPAM map and, for `X`/`Y`, the readout-pulse contrast
/// loss.
pub fn spam_correct(p: f64, basis: Basis, spam: &SpamParams) -> f64 {
    let (e, g) = (spam.read_excited_given_excited(), spam.read_excited_given_ground());
    let mut r = 2.0 * (p - g) / (e - g) - 1.0;
    if basis != Basis::Z {
        r /= 2.0 * spam.readout_pulse_fidelity - 1.0;
    }
    (0.5 * (1.0 + r)).clamp(0.0, 1.0)
}

/// Fidelity of the linear-inversion estimate. No projection onto the Bloch
/// ball, so for cardinal targets it equals the population along the target
/// axis.
fn fidelity(state: CardinalState, p: [f64; 3]) -> HarnessResult<f64> {
    let rho = DensityMatrix::from_bloch([2.0 * p[0] - 1.0, 2.0 * p[1] - 1.0, 2.0 * p[2] - 1.0]);
    Ok(state_fidelity(&rho, &state.target())?)
}

pub(super) fn run(ctx: &mut Context) -> HarnessResult<()> {
    let layout = ctx.config.tomography.as_ref().map_or("array", |t| t.layout.as_str()).to_string();
    ctx.report.param("tomography.layout", &layout);
    let opts = ctx.v.compile;
    let spam = ctx.v.noise.spam;
    let shots = ctx.shots();
    let name = ctx.name();

    // (state, preparation, site)
    let preps: Vec<(CardinalState, PulseSequence, usize)> = if layout == "per-state" {
        build_cardinal_states(&opts)?.into_iter().map(|(s, seq)| (s, seq, 0)).collect()
    } else {
        let (states, seq) = build_cardinal_array(&opts)?;
        states.into_iter().enumerate().map(|(j, s)| (s, seq.clone(), j)).collect()
    };

    let mut sampled = vec![[0.0; 3]; preps.len()];
    let mut expected = vec![[0.0; 3]; preps.len()];
    let mut seed_index = 0;
    for (b, &basis) in BASES.iter().enumerate() {
        let mut done: Vec<(usize, Vec<u64>, Vec<f64>)> = Vec::new();
        for (i, (_, prep, site)) in preps.iter().enumerate() {
            // The array layout shares one sequence between all states.
            let key = if layout == "per-state" { i } else { 0 };
            if !done.iter().any(|d| d.0 == key) {
                let seq = with_measurement(prep, vec![basis; prep.array_size])?;
                if basis == Basis::Z {
                    ctx.keep_sequence(&seq);
                }
                let sim = ctx.simulation(&seq, Detuning::Constant(0.0))?;
                let (c, e) = measure(&sim, ctx.point_seed(seed_index), shots, &spam);
                seed_index += 1;
                done.push((key, c, e));
            }
            let (_, c, e) = done.iter().find(|d| d.0 == key).expect("measured above");
            sampled[i][b] = c[*site] as f64 / shots as f64;
            expected[i][b] = e[*site];
            ctx.table.population(name, "populations", &format!("{} {}", preps[i].0.label(), basis.as_char()), b as f64, c[*site], shots);
        }
    }

    let mut raw = Vec::new();
    let mut corrected = Vec::new();
    let mut exp = Vec::new();
    for (i, (state, _, _)) in preps.iter().enumerate() {
        let f_raw = fidelity(*state, sampled[i])?;
        let mut pc = [0.0; 3];
        for b in 0..3 {
            pc[b] = spam_correct(sampled[i][b], BASES[b], &spam);
        }
        let f_corr = fidelity(*state, pc)?;
        let f_exp = fidelity(*state, expected[i])?;
        ctx.table.value(name, "fidelity", "raw", i as f64, f_raw);
        ctx.table.value(name, "fidelity", "spam-corrected", i as f64, f_corr);
        ctx.table.value(name, "fidelity", "expected", i as f64, f_exp);
        let t = tomography_reconstruct(pc[0], pc[1], pc[2])?;
        for (c, v) in t.rho.bloch_vector().iter().enumerate() {
            ctx.table.value(name, "bloch", state.label(), c as f64, *v);
        }
        ctx.report.result(&format!("fidelity[{}]", state.label()), f_raw);
        ctx.report.result(&format!("fidelity_spam_corrected[{}]", state.label()), f_corr);
        raw.push(f_raw);
        corrected.push(f_corr);
        exp.push(f_exp);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    ctx.report.result("mean_fidelity", mean(&raw));
    ctx.report.result("mean_fidelity_spam_corrected", mean(&corrected));
    ctx.report.result("mean_fidelity_expected", mean(&exp));
    ctx.report.result("state_order", preps.iter().map(|p| p.0.label()).collect::<Vec<_>>());

    // Global X(π) from |0⟩ and a Z(2π) move of one atom between quarter-turns.
    let duration = if opts.timing.finite_pulses { opts.drive.pulse_duration_us(PI) } else { 0.0 };
    let mut xpi = PulseSequence::new(1);
    xpi.push(Instruction::GlobalPulse { angle: PI, drive_phase: 0.0, duration });
    xpi.push(Instruction::Measure { bases: vec![Basis::Z] });
    let sim = ctx.simulation(&xpi, Detuning::Constant(0.0))?;
    let (c, e) = measure(&sim, ctx.point_seed(100), shots, &spam);
    let f_xpi = e[0];
    ctx.table.population(name, "global_pulse", "x-pi", PI, c[0], shots);
    ctx.report.result("x_pi_fidelity", f_xpi);

    let lambda = opts.drive.wavelength_nm;
    let seq = build_parity_addressing(2, lambda, &opts)?;
    let sim = ctx.simulation(&seq, Detuning::Constant(0.0))?;
    let (c, e) = measure(&sim, ctx.point_seed(101), shots, &spam);
    ctx.table.population(name, "shift", "unshifted", lambda, c[0], shots);
    ctx.table.population(name, "shift", "shifted", lambda, c[1], shots);
    ctx.report.result("shifted_population", e[1]);
    ctx.report.result("unshifted_population", e[0]);
    ctx.report.result("shift_fidelity", e[1] / f_xpi);
    ctx.report.result("shifted_to_unshifted_ratio", e[1] / e[0]);
    Ok(())
}
