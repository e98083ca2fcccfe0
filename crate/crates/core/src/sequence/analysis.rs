use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use super::{Instruction, PulseSequence, DEFAULT_MIN_SHIFT_TIME_US};
use crate::error::{invalid, Error, Result};

const ANGLE_TOL: f64 = 1e-9;

fn angle_is(angle: f64, target: f64) -> bool {
    let d = (angle - target).rem_euclid(TAU);
    d < ANGLE_TOL || TAU - d < ANGLE_TOL
}

/// `∫s(t)dt / T` for a sign `s` that is `+1` after the last flip and
/// alternates at each earlier flip. `flips` are times in `(0, T)`, ascending.
pub(crate) fn signed_fraction(flips: &[f64], dark_time: f64) -> f64 {
    let n = flips.len();
    let mut edges = Vec::with_capacity(n + 2);
    edges.push(0.0);
    edges.extend_from_slice(flips);
    edges.push(dark_time);
    let mut total = 0.0;
    for i in 0..=n {
        let sign = if (n - i) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * (edges[i + 1] - edges[i]);
    }
    total / dark_time
}

/// Ramsey dark time of `seq` and the flip centres seen by `site`, measured
/// from the centre of the opening quarter-turn.
///
/// The skeleton is the first and last global pulse, both quarter-turns.
/// Global π pulses in between flip every site; any other intermediate global
/// pulse is an analysis error.
pub fn flip_centres(seq: &PulseSequence, site: usize) -> Result<(f64, Vec<f64>)> {
    if site >= seq.array_size {
        return Err(invalid(format!("site {site} outside array of {}", seq.array_size)));
    }
    let starts = seq.start_times();
    let globals: Vec<(usize, f64, f64)> = seq
        .instructions
        .iter()
        .enumerate()
        .filter_map(|(i, ins)| match ins {
            Instruction::GlobalPulse { angle, .. } => Some((i, starts[i] + ins.centre_offset(), *angle)),
            _ => None,
        })
        .collect();
    if globals.len() < 2 {
        return Err(Error::Analysis("sequence needs opening and closing global pulses".into()));
    }
    let (first, last) = (globals[0], globals[globals.len() - 1]);
    for (idx, _, angle) in [first, last] {
        if !(angle_is(angle, FRAC_PI_2) || angle_is(angle, -FRAC_PI_2)) {
            return Err(Error::Analysis(format!("instruction {idx}: Ramsey pulse angle {angle} is not a quarter turn")));
        }
    }
    let dark_time = last.1 - first.1;
    if !(dark_time > 0.0) {
        return Err(Error::Analysis("dark time is not positive".into()));
    }
    let mut flips = Vec::new();
    for &(idx, centre, angle) in &globals[1..globals.len() - 1] {
        if angle_is(angle, PI) || angle_is(angle, -PI) {
            flips.push((idx, centre));
        } else if !angle_is(angle, 0.0) {
            return Err(Error::Analysis(format!("instruction {idx}: unexpected global pulse of angle {angle}")));
        }
    }
    for (i, ins) in seq.instructions.iter().enumerate() {
        if let Instruction::LocalPiFlip { sites, .. } = ins {
            if sites.contains(&site) {
                flips.push((i, starts[i] + ins.centre_offset()));
            }
        }
    }
    flips.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut rel = Vec::with_capacity(flips.len());
    for (idx, centre) in flips {
        let t = centre - first.1;
        if !(t > 0.0 && t < dark_time) {
            return Err(Error::Analysis(format!("instruction {idx}: flip at {t} µs outside the dark time (0, {dark_time})")));
        }
        rel.push(t);
    }
    Ok((dark_time, rel))
}

/// Signed fraction of the dark time over which `site` accumulates laser
/// phase, `∫s(t)dt / T`; flips are treated as instantaneous at their
/// centres. No state simulation is involved.
pub fn effective_phase_fraction(seq: &PulseSequence, site: usize) -> Result<f64> {
    let (dark_time, flips) = flip_centres(seq, site)?;
    Ok(signed_fraction(&flips, dark_time))
}

/// A rule broken by a sequence; `index` is the offending instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "instruction {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// [`validate_with`] at the default minimum shift time.
pub fn validate(seq: &PulseSequence) -> Vec<Violation> {
    validate_with(seq, DEFAULT_MIN_SHIFT_TIME_US)
}

/// Checks durations, the minimum shift time, site bounds and that `Measure`
/// only appears at the end. An empty list means the sequence is valid.
pub fn validate_with(seq: &PulseSequence, min_shift_time_us: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = seq.array_size;
    if n == 0 {
        out.push(Violation { index: None, message: "array size is zero".into() });
    }
    let mut push = |i: usize, message: String| out.push(Violation { index: Some(i), message });
    let mut measured = false;
    for (i, ins) in seq.instructions.iter().enumerate() {
        let d = ins.duration();
        if !(d.is_finite() && d >= 0.0) {
            push(i, format!("invalid duration {d}"));
        }
        if measured && !matches!(ins, Instruction::Measure { .. }) {
            push(i, "instruction after Measure".into());
        }
        match ins {
            Instruction::GlobalPulse { angle, drive_phase, duration } => {
                if !(angle.is_finite() && drive_phase.is_finite()) {
                    push(i, "non-finite pulse angle or phase".into());
                }
                if *duration < 0.0 {
                    push(i, "negative pulse duration".into());
                }
            }
            Instruction::LocalShift { moves, shift_time } => {
                if *shift_time < min_shift_time_us {
                    push(i, format!("shift time {shift_time} µs below minimum {min_shift_time_us} µs"));
                }
                let mut seen = Vec::with_capacity(moves.len());
                for &(site, dx) in moves {
                    if site >= n {
                        push(i, format!("site {site} outside array of {n}"));
                    }
                    if seen.contains(&site) {
                        push(i, format!("site {site} moved twice"));
                    }
                    seen.push(site);
                    if !dx.is_finite() {
                        push(i, format!("non-finite move for site {site}"));
                    }
                }
            }
            Instruction::Wait { duration } => {
                if *duration < 0.0 {
                    push(i, "negative wait".into());
                }
            }
            Instruction::LocalPiFlip { sites, mode, shift_time, pad, pulse_duration, shift_nm } => {
                if sites.is_empty() {
                    push(i, "flip without target sites".into());
                }
                for (k, &site) in sites.iter().enumerate() {
                    if site >= n {
                        push(i, format!("site {site} outside array of {n}"));
                    }
                    if sites[..k].contains(&site) {
                        push(i, format!("site {site} listed twice"));
                    }
                }
                if *pulse_duration < 0.0 || *pad < 0.0 || !shift_nm.is_finite() {
                    push(i, "invalid flip parameters".into());
                }
                if *mode == super::FlipMode::Composite && *shift_time < min_shift_time_us {
                    push(i, format!("flip shift time {shift_time} µs below minimum {min_shift_time_us} µs"));
                }
            }
            Instruction::Measure { bases } => {
                measured = true;
                if bases.len() != n {
                    push(i, format!("Measure lists {} bases for {n} sites", bases.len()));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::CompileOptions;

    fn ramsey_with_flips(flips: &[f64], dark_time: f64) -> PulseSequence {
        let opts = CompileOptions::ideal();
        let mut seq = PulseSequence::new(1);
        seq.push(opts.pulse(FRAC_PI_2, 0.0));
        let mut t = 0.0;
        for &f in flips {
            seq.push(Instruction::Wait { duration: f - t });
            seq.push(opts.flip(vec![0]));
            t = f;
        }
        seq.push(Instruction::Wait { duration: dark_time - t });
        seq.push(opts.pulse(FRAC_PI_2, 0.0));
        seq
    }

    #[test]
    fn fraction_examples() {
        assert_eq!(effective_phase_fraction(&ramsey_with_flips(&[], 8.0), 0).unwrap(), 1.0);
        assert_eq!(effective_phase_fraction(&ramsey_with_flips(&[2.0], 8.0), 0).unwrap(), 0.5);
        assert_eq!(effective_phase_fraction(&ramsey_with_flips(&[3.0], 8.0), 0).unwrap(), 0.25);
        assert_eq!(effective_phase_fraction(&ramsey_with_flips(&[1.0, 5.0], 8.0), 0).unwrap(), 0.0);
    }

    #[test]
    fn malformed_skeleton_is_an_analysis_error() {
        let mut seq = PulseSequence::new(1);
        seq.push(Instruction::Wait { duration: 1.0 });
        assert!(matches!(effective_phase_fraction(&seq, 0), Err(Error::Analysis(_))));
        let opts = CompileOptions::ideal();
        seq.push(opts.pulse(FRAC_PI_2, 0.0)).push(opts.pulse(1.0, 0.0)).push(opts.pulse(FRAC_PI_2, 0.0));
        assert!(matches!(effective_phase_fraction(&seq, 0), Err(Error::Analysis(_))));
    }

    #[test]
    fn validation_flags_short_shift_and_early_measure() {
        let mut seq = PulseSequence::new(2);
        seq.push(Instruction::LocalShift { moves: vec![(1, 100.0)], shift_time: 5.0 });
        let v = validate(&seq);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].index, Some(0));
        seq.push(Instruction::Measure { bases: vec![crate::qubit::Basis::Z; 2] });
        seq.push(Instruction::Wait { duration: 1.0 });
        let v = validate_with(&seq, 0.0);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("after Measure"));
        seq.instructions[0] = Instruction::LocalShift { moves: vec![(2, 1.0)], shift_time: 30.0 };
        assert!(validate_with(&seq, 0.0).iter().any(|v| v.message.contains("outside")));
    }
}
