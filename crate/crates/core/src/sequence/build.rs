use std::f64::consts::{FRAC_PI_2, PI};

use super::{CompileOptions, EnsembleLayout, Instruction, PulseSequence, SensitivitySchedule};
use crate::error::{ensure_finite, invalid, Result};
use crate::estimation::Quadrature;
use crate::qubit::{Basis, QubitState};

/// Reduces a move distance modulo `λ` into `(−λ/2, λ/2]`.
pub fn reduce_move(delta_x_nm: f64, wavelength_nm: f64) -> f64 {
    let r = delta_x_nm.rem_euclid(wavelength_nm);
    if r > 0.5 * wavelength_nm {
        r - wavelength_nm
    } else {
        r
    }
}

fn reduced_move_for_phase(phi: f64, opts: &CompileOptions) -> f64 {
    reduce_move(opts.drive.move_for_phase(phi), opts.drive.wavelength_nm)
}

/// A block of instructions whose effective centre should sit `centre` after
/// the opening pulse centre.
struct Event {
    centre: f64,
    offset: f64,
    block: Vec<Instruction>,
}

/// Ramsey skeleton: quarter-turn, timed events, optional readout shift
/// ending at the closing quarter-turn, closing quarter-turn, `Z` readout.
fn assemble(
    n_sites: usize,
    dark_time: f64,
    opts: &CompileOptions,
    mut events: Vec<Event>,
    readout_moves: Vec<(usize, f64)>,
) -> Result<PulseSequence> {
    opts.validate()?;
    if !(dark_time.is_finite() && dark_time >= 0.0) {
        return Err(invalid(format!("dark time must be >= 0, got {dark_time}")));
    }
    let open = opts.pulse(FRAC_PI_2, 0.0);
    let d = open.duration();
    let origin = 0.5 * d;
    let mut seq = PulseSequence::new(n_sites);
    seq.push(open);
    let mut cursor = d;
    let mut place = |seq: &mut PulseSequence, start: f64, block: Vec<Instruction>, what: &str| -> Result<()> {
        let gap = start - cursor;
        if gap < -1e-9 * (1.0 + dark_time) {
            return Err(invalid(format!(
                "{what} overlaps the preceding instruction by {} µs; dark time {dark_time} µs is too short",
                -gap
            )));
        }
        if gap > 0.0 {
            seq.push(Instruction::Wait { duration: gap });
        }
        cursor = start.max(cursor);
        for ins in block {
            cursor += ins.duration();
            seq.push(ins);
        }
        Ok(())
    };
    events.sort_by(|a, b| a.centre.total_cmp(&b.centre));
    for ev in events {
        place(&mut seq, origin + ev.centre - ev.offset, ev.block, "timed event")?;
    }
    let close_start = origin + dark_time - 0.5 * d;
    if !readout_moves.is_empty() {
        place(&mut seq, close_start - opts.shift_block_duration(), opts.shift_block(readout_moves), "readout shift")?;
    }
    place(&mut seq, close_start, vec![opts.pulse(FRAC_PI_2, 0.0)], "closing pulse")?;
    seq.push(Instruction::Measure { bases: vec![Basis::Z; n_sites] });
    Ok(seq)
}

/// Quarter-turn, move the odd sites by `delta_x_nm`, quarter-turn, `Z`
/// readout. Even sites are never moved.
pub fn build_parity_addressing(n_sites: usize, delta_x_nm: f64, opts: &CompileOptions) -> Result<PulseSequence> {
    if n_sites < 2 {
        return Err(invalid("parity addressing needs at least 2 sites"));
    }
    ensure_finite("delta_x_nm", delta_x_nm)?;
    opts.validate()?;
    let mut seq = PulseSequence::new(n_sites);
    seq.push(opts.pulse(FRAC_PI_2, 0.0));
    let moves = (1..n_sites).step_by(2).map(|j| (j, delta_x_nm)).collect();
    for ins in opts.shift_block(moves) {
        seq.push(ins);
    }
    seq.push(opts.pulse(FRAC_PI_2, 0.0));
    seq.push(Instruction::Measure { bases: vec![Basis::Z; n_sites] });
    Ok(seq)
}

/// Ramsey sequence with per-site frame rotations `phi[j]` imprinted by a
/// single shift centred in the dark time. Moves are reduced mod `λ`.
pub fn build_phase_pattern(phi: &[f64], dark_time: f64, opts: &CompileOptions) -> Result<PulseSequence> {
    if phi.is_empty() {
        return Err(invalid("phase pattern has no sites"));
    }
    for (j, &p) in phi.iter().enumerate() {
        ensure_finite(&format!("phi[{j}]"), p)?;
    }
    let moves: Vec<(usize, f64)> = phi
        .iter()
        .enumerate()
        .map(|(j, &p)| (j, reduced_move_for_phase(p, opts)))
        .filter(|m| m.1 != 0.0)
        .collect();
    let mut events = Vec::new();
    if !moves.is_empty() {
        let block = opts.shift_block(moves);
        events.push(Event { centre: 0.5 * dark_time, offset: 0.5 * opts.shift_block_duration(), block });
    }
    assemble(phi.len(), dark_time, opts, events, Vec::new())
}

fn readout_moves(layout: &EnsembleLayout, odd_flips: impl Fn(usize) -> bool, opts: &CompileOptions) -> Vec<(usize, f64)> {
    (0..layout.n_sites())
        .map(|j| {
            let mut phi = if layout.quadrature_of(j) == Quadrature::Y { FRAC_PI_2 } else { 0.0 };
            if odd_flips(layout.ensemble_of(j)) {
                phi += PI;
            }
            (j, reduced_move_for_phase(phi, opts))
        })
        .filter(|m| m.1 != 0.0)
        .collect()
}

/// Single-ensemble Ramsey with dual-quadrature readout: `Y` sites get a
/// quarter-wave frame rotation just before the closing pulse, so they read
/// `(1 + sin θ)/2` while `X` sites read `(1 + cos θ)/2`.
pub fn build_dual_quadrature(layout: &EnsembleLayout, dark_time: f64, opts: &CompileOptions) -> Result<PulseSequence> {
    if layout.n_ensembles() != 1 {
        return Err(invalid(format!("dual-quadrature Ramsey needs one ensemble, layout has {}", layout.n_ensembles())));
    }
    assemble(layout.n_sites(), dark_time, opts, Vec::new(), readout_moves(layout, |_| false, opts))
}

fn compile_ensembles(
    layout: &EnsembleLayout,
    kernels: usize,
    tau: f64,
    opts: &CompileOptions,
) -> Result<(PulseSequence, SensitivitySchedule)> {
    let m_count = layout.n_ensembles();
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid(format!("kernel length must be > 0, got {tau}")));
    }
    let dark_time = kernels as f64 * tau;
    let mut events = Vec::new();
    let mut flip_fractions = vec![Vec::new(); m_count];
    for (m, fractions) in flip_fractions.iter_mut().enumerate().skip(1) {
        let sites = layout.sites(m);
        let rate = 0.5f64.powi(m as i32);
        for j in 0..kernels {
            // Starting sign of kernel j, so that each kernel nets +τ·2^{−m}
            // with the sign ending at +1 after the last kernel.
            let sigma = if (kernels - j) % 2 == 0 { 1.0 } else { -1.0 };
            let centre = j as f64 * tau + 0.5 * tau * (1.0 + sigma * rate);
            let flip = opts.flip(sites.clone());
            events.push(Event { centre, offset: flip.centre_offset(), block: vec![flip] });
            fractions.push(centre / dark_time);
        }
    }
    let odd = kernels % 2 == 1;
    let readout = readout_moves(layout, |m| m > 0 && odd, opts);
    let seq = assemble(layout.n_sites(), dark_time, opts, events, readout)?;
    let schedule = SensitivitySchedule { n_ensembles: m_count, kernel_count: kernels, kernel_length: tau, flip_fractions };
    Ok((seq, schedule))
}

/// Three-ensemble local dynamical decoupling: ensemble 0 evolves freely,
/// ensemble 1 is flipped at `T/4` and ensemble 2 at `3T/8`, giving phase
/// fractions 1, 1/2, 1/4. All ensembles get dual-quadrature readout.
pub fn build_local_dd(layout: &EnsembleLayout, total_time: f64, opts: &CompileOptions) -> Result<PulseSequence> {
    if layout.n_ensembles() != 3 {
        return Err(invalid(format!("local DD needs 3 ensembles, layout has {}", layout.n_ensembles())));
    }
    Ok(compile_ensembles(layout, 1, total_time, opts)?.0)
}

/// `k` kernels of length `τ`; in every kernel ensemble `m ≥ 1` is flipped
/// once so that it nets `τ·2^{−m}` of phase. Total dark time is `k·τ`.
pub fn build_kernel_schedule(
    layout: &EnsembleLayout,
    kernels: usize,
    tau: f64,
    opts: &CompileOptions,
) -> Result<(PulseSequence, SensitivitySchedule)> {
    if layout.n_ensembles() < 2 {
        return Err(invalid("kernel schedule needs at least 2 ensembles"));
    }
    if kernels == 0 {
        return Err(invalid("kernel count must be >= 1"));
    }
    compile_ensembles(layout, kernels, tau, opts)
}

/// The six cardinal states, `|0⟩ = −Z` and `|1⟩ = +Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CardinalState {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
    PlusZ,
    MinusZ,
}

impl CardinalState {
    pub const ALL: [CardinalState; 6] = [
        CardinalState::PlusX,
        CardinalState::MinusX,
        CardinalState::PlusY,
        CardinalState::MinusY,
        CardinalState::PlusZ,
        CardinalState::MinusZ,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CardinalState::PlusX => "+X",
            CardinalState::MinusX => "-X",
            CardinalState::PlusY => "+Y",
            CardinalState::MinusY => "-Y",
            CardinalState::PlusZ => "+Z",
            CardinalState::MinusZ => "-Z",
        }
    }

    pub fn target(self) -> QubitState {
        match self {
            CardinalState::PlusX => QubitState::from_bloch_angles(FRAC_PI_2, 0.0),
            CardinalState::MinusX => QubitState::from_bloch_angles(FRAC_PI_2, PI),
            CardinalState::PlusY => QubitState::from_bloch_angles(FRAC_PI_2, FRAC_PI_2),
            CardinalState::MinusY => QubitState::from_bloch_angles(FRAC_PI_2, -FRAC_PI_2),
            CardinalState::PlusZ => QubitState::excited(),
            CardinalState::MinusZ => QubitState::ground(),
        }
    }

    /// Frame rotations after the first and second quarter-turn in the
    /// parallel array protocol.
    fn array_shifts(self) -> (f64, f64) {
        match self {
            CardinalState::PlusZ => (0.0, 0.0),
            CardinalState::MinusZ => (PI, 0.0),
            CardinalState::PlusX => (-FRAC_PI_2, 0.0),
            CardinalState::MinusX => (FRAC_PI_2, 0.0),
            CardinalState::PlusY => (-FRAC_PI_2, FRAC_PI_2),
            CardinalState::MinusY => (-FRAC_PI_2, -FRAC_PI_2),
        }
    }
}

/// One single-site preparation sequence per cardinal state, starting from
/// `|0⟩`, without readout.
pub fn build_cardinal_states(opts: &CompileOptions) -> Result<Vec<(CardinalState, PulseSequence)>> {
    opts.validate()?;
    Ok(CardinalState::ALL
        .iter()
        .map(|&s| {
            let mut seq = PulseSequence::new(1);
            let quarter = || opts.pulse(FRAC_PI_2, 0.0);
            let shift = |phi: f64| opts.shift_block(vec![(0, reduced_move_for_phase(phi, opts))]);
            match s {
                CardinalState::MinusZ => {}
                CardinalState::PlusZ => {
                    seq.push(quarter()).push(quarter());
                }
                CardinalState::PlusY => {
                    seq.push(quarter());
                }
                CardinalState::MinusY | CardinalState::PlusX | CardinalState::MinusX => {
                    let phi = match s {
                        CardinalState::MinusY => PI,
                        CardinalState::PlusX => -FRAC_PI_2,
                        _ => FRAC_PI_2,
                    };
                    seq.push(quarter());
                    seq.instructions.extend(shift(phi));
                }
            }
            (s, seq)
        })
        .collect())
}

/// All six cardinal states prepared in parallel on six sites with two
/// global quarter-turns, each followed by a site-resolved shift.
pub fn build_cardinal_array(opts: &CompileOptions) -> Result<(Vec<CardinalState>, PulseSequence)> {
    opts.validate()?;
    let states = CardinalState::ALL.to_vec();
    let mut seq = PulseSequence::new(states.len());
    for stage in 0..2 {
        seq.push(opts.pulse(FRAC_PI_2, 0.0));
        let moves: Vec<(usize, f64)> = states
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let (b, c) = s.array_shifts();
                (j, reduced_move_for_phase(if stage == 0 { b } else { c }, opts))
            })
            .filter(|m| m.1 != 0.0)
            .collect();
        if !moves.is_empty() {
            seq.instructions.extend(opts.shift_block(moves));
        }
    }
    Ok((states, seq))
}

/// Copy of `seq` with a final `Measure` in the given bases.
pub fn with_measurement(seq: &PulseSequence, bases: Vec<Basis>) -> Result<PulseSequence> {
    if bases.len() != seq.array_size {
        return Err(invalid(format!("{} bases for {} sites", bases.len(), seq.array_size)));
    }
    let mut out = seq.clone();
    out.push(Instruction::Measure { bases });
    Ok(out)
}
