//! Multi-site executor for compiled pulse sequences.
//!
//! Pulses act instantaneously at their centre times. Each site carries a
//! drive-frame phase that every move advances by `k·Δx`; a global pulse acts
//! on a site with phase `drive_phase + frame − θ(t)`, where `θ(t)` is the
//! laser phase (detuning plus sampled noise). A site's evolution therefore
//! depends only on its own instruction stream and the shared laser phase.
//!
//! Randomness per shot comes from independent streams keyed by
//! `(seed, "laser", shot)` and `(seed, "spam", shot, site)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};
use crate::noise::{apply_spam, sample_phases, NoiseModel};
use crate::qubit::{Basis, DriveParams, QubitState};
use crate::rng;
use crate::sequence::{validate_with, FlipMode, Instruction, PulseSequence};

/// Laser detuning from the atomic transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detuning {
    /// Hz
    Constant(f64),
    /// `hz[i]` holds on `[start_us + i·segment_us, start_us + (i+1)·segment_us)`;
    /// the first value extends before `start_us` and the last one after the
    /// final segment.
    Piecewise { start_us: f64, segment_us: f64, hz: Vec<f64> },
}

impl Default for Detuning {
    fn default() -> Self {
        Detuning::Constant(0.0)
    }
}

impl Detuning {
    pub fn validate(&self) -> Result<()> {
        match self {
            Detuning::Constant(hz) => ensure_finite("detuning", *hz),
            Detuning::Piecewise { start_us, segment_us, hz } => {
                ensure_finite("start_us", *start_us)?;
                if !(segment_us.is_finite() && *segment_us > 0.0) {
                    return Err(invalid("segment_us must be > 0"));
                }
                if hz.is_empty() {
                    return Err(invalid("piecewise detuning needs at least one value"));
                }
                hz.iter().try_for_each(|&v| ensure_finite("detuning", v))
            }
        }
    }

    /// Accumulated laser phase `2π∫₀ᵗ δ dt'` at `t_us`.
    pub fn phase(&self, t_us: f64) -> f64 {
        match self {
            Detuning::Constant(hz) => TAU * hz * t_us * 1e-6,
            Detuning::Piecewise { start_us, segment_us, hz } => {
                let rate_at = |i: usize| hz[i.min(hz.len() - 1)];
                if t_us <= *start_us {
                    return TAU * hz[0] * t_us * 1e-6;
                }
                let mut acc = hz[0] * start_us;
                let rel = t_us - start_us;
                let whole = (rel / segment_us).floor() as usize;
                for i in 0..whole {
                    acc += rate_at(i) * segment_us;
                }
                acc += rate_at(whole) * (rel - whole as f64 * segment_us);
                TAU * acc * 1e-6
            }
        }
    }
}

/// Physical setting of a simulation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Environment {
    pub drive: DriveParams,
    pub noise: NoiseModel,
    pub detuning: Detuning,
}

impl Environment {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        self.noise.validate()?;
        self.detuning.validate()
    }
}

#[derive(Debug, Clone)]
enum Op {
    /// Pulse on all sites, or on the listed sites only.
    Pulse { angle: f64, drive_phase: f64, only: Option<Vec<usize>> },
    Frame { moves: Vec<(usize, f64)> },
    Measure { bases: Vec<Basis> },
}

#[derive(Debug, Clone)]
struct Event {
    /// Index into the time grid.
    slot: usize,
    op: Op,
}

/// Final state of one site before readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteState {
    /// State in the site's own drive frame.
    pub local: QubitState,
    /// Accumulated frame phase.
    pub frame: f64,
    /// Bloch-vector shrink from pulse depolarization.
    pub shrink: f64,
}

impl SiteState {
    pub fn bloch_vector(&self) -> [f64; 3] {
        self.local.bloch_vector().map(|c| c * self.shrink)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotOutcome {
    /// Excited-state probability per site after readout rotations and pulse
    /// errors, before the SPAM channel.
    pub probabilities: Vec<f64>,
    pub outcomes: Vec<bool>,
}

/// A sequence lowered to timed events, ready to run many shots.
#[derive(Debug, Clone)]
pub struct Simulation {
    n_sites: usize,
    env: Environment,
    /// Event times in µs, ascending, first entry 0.
    grid_us: Vec<f64>,
    /// Same times in laser-noise time units.
    grid_fit: Vec<f64>,
    events: Vec<Event>,
}

impl Simulation {
    pub fn new(seq: &PulseSequence, env: &Environment) -> Result<Self> {
        env.validate()?;
        if let Some(v) = validate_with(seq, 0.0).first() {
            return Err(invalid(format!("cannot simulate: {v}")));
        }
        let k_eff = env.drive.wavevector() * (1.0 + env.drive.distance_scale_error);
        let n = seq.array_size;
        let mut timed: Vec<(f64, Op)> = Vec::new();
        let mut t = 0.0;
        for ins in &seq.instructions {
            match ins {
                Instruction::GlobalPulse { angle, drive_phase, duration } => {
                    timed.push((t + 0.5 * duration, Op::Pulse { angle: *angle, drive_phase: *drive_phase, only: None }));
                }
                Instruction::LocalShift { moves, .. } => {
                    let moves = moves.iter().map(|&(j, dx)| (j, k_eff * dx)).collect();
                    timed.push((t, Op::Frame { moves }));
                }
                Instruction::Wait { .. } => {}
                Instruction::LocalPiFlip { sites, mode: FlipMode::Ideal, pulse_duration, .. } => {
                    timed.push((t + 0.5 * pulse_duration, Op::Pulse { angle: PI, drive_phase: 0.0, only: Some(sites.clone()) }));
                }
                Instruction::LocalPiFlip { sites, mode: FlipMode::Composite, pulse_duration, shift_time, pad, shift_nm } => {
                    let others: Vec<usize> = (0..n).filter(|j| !sites.contains(j)).collect();
                    let phi = k_eff * shift_nm;
                    let quarter = std::f64::consts::FRAC_PI_2;
                    let second = t + pulse_duration + shift_time + pad;
                    timed.push((t + 0.5 * pulse_duration, Op::Pulse { angle: quarter, drive_phase: 0.0, only: None }));
                    timed.push((t + pulse_duration, Op::Frame { moves: others.iter().map(|&j| (j, phi)).collect() }));
                    timed.push((second + 0.5 * pulse_duration, Op::Pulse { angle: quarter, drive_phase: 0.0, only: None }));
                    timed.push((second + pulse_duration, Op::Frame { moves: others.iter().map(|&j| (j, -phi)).collect() }));
                }
                Instruction::Measure { bases } => timed.push((t, Op::Measure { bases: bases.clone() })),
            }
            t += ins.duration();
        }
        // Instruction order is time order except inside a composite flip,
        // whose events are already emitted in order.
        let mut grid_us = vec![0.0];
        let mut events = Vec::with_capacity(timed.len());
        for (time, op) in timed {
            if time > *grid_us.last().unwrap() {
                grid_us.push(time);
            }
            events.push(Event { slot: grid_us.len() - 1, op });
        }
        let unit = env.noise.laser.time_unit_us;
        let grid_fit = grid_us.iter().map(|t| t / unit).collect();
        Ok(Self { n_sites: n, env: env.clone(), grid_us, grid_fit, events })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    /// Laser phase at each event time of one shot.
    fn laser_phases(&self, seed: u64, shot: u64, with_noise: bool) -> Vec<f64> {
        let noise = if with_noise && !self.env.noise.laser.is_noiseless() {
            let mut r = rng::stream(seed, &[rng::label("laser"), shot]);
            sample_phases(&self.env.noise.laser, &self.grid_fit, &mut r)
        } else {
            vec![0.0; self.grid_us.len()]
        };
        self.grid_us.iter().zip(noise).map(|(&t, n)| self.env.detuning.phase(t) + n).collect()
    }

    fn evolve(&self, laser: &[f64]) -> (Vec<QubitState>, Vec<f64>, Vec<f64>, Option<(Vec<Basis>, f64)>) {
        let n = self.n_sites;
        let mut states = vec![QubitState::ground(); n];
        let mut frames = vec![0.0; n];
        let mut shrink = vec![1.0; n];
        let mut readout = None;
        for ev in &self.events {
            let theta = laser[ev.slot];
            match &ev.op {
                Op::Pulse { angle, drive_phase, only } => {
                    let s = self.env.noise.pulse_shrink(*angle);
                    let mut apply = |j: usize| {
                        states[j] = states[j].rotated(*angle, drive_phase + frames[j] - theta);
                        shrink[j] *= s;
                    };
                    match only {
                        None => (0..n).for_each(&mut apply),
                        Some(sites) => sites.iter().for_each(|&j| apply(j)),
                    }
                }
                Op::Frame { moves } => {
                    for &(j, dphi) in moves {
                        frames[j] += dphi;
                    }
                }
                Op::Measure { bases } => {
                    if readout.is_none() {
                        readout = Some((bases.clone(), theta));
                    }
                }
            }
        }
        (states, frames, shrink, readout)
    }

    fn site_states_from(&self, laser: &[f64]) -> Vec<SiteState> {
        let (states, frames, shrink, readout) = self.evolve(laser);
        // Express the lab state in each site's frame, referenced to the
        // laser phase at readout (or at the last event without a readout).
        let theta = readout.map_or_else(|| laser.last().copied().unwrap_or(0.0), |r| r.1);
        (0..self.n_sites)
            .map(|j| SiteState { local: states[j].apply_local_phase(frames[j] - theta), frame: frames[j], shrink: shrink[j] })
            .collect()
    }

    /// Pre-readout state of every site in its own frame, for one shot.
    pub fn site_states(&self, seed: u64, shot: u64) -> Vec<SiteState> {
        self.site_states_from(&self.laser_phases(seed, shot, true))
    }

    fn probabilities_from(&self, laser: &[f64]) -> Vec<f64> {
        let (states, frames, shrink, readout) = self.evolve(laser);
        let spam = &self.env.noise.spam;
        let readout_shrink = 2.0 * spam.readout_pulse_fidelity - 1.0;
        (0..self.n_sites)
            .map(|j| {
                let (basis, theta) = match &readout {
                    Some((bases, theta)) => (bases[j], *theta),
                    None => (Basis::Z, 0.0),
                };
                let (pure, lambda) = match basis.readout_pulse_phase() {
                    None => (states[j].p_excited(), shrink[j]),
                    Some(phase) => {
                        let rotated = states[j].rotated(std::f64::consts::FRAC_PI_2, phase + frames[j] - theta);
                        (rotated.p_excited(), shrink[j] * readout_shrink)
                    }
                };
                (lambda * pure + 0.5 * (1.0 - lambda)).clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Excited-state probabilities of one shot before SPAM.
    pub fn probabilities(&self, seed: u64, shot: u64) -> Vec<f64> {
        self.probabilities_from(&self.laser_phases(seed, shot, true))
    }

    /// Probabilities with the laser noise switched off (detuning and pulse
    /// errors kept).
    pub fn noiseless_probabilities(&self) -> Vec<f64> {
        self.probabilities_from(&self.laser_phases(0, 0, false))
    }

    /// One shot: sample the laser phase, evolve, read out through SPAM.
    pub fn run_shot(&self, seed: u64, shot: u64) -> ShotOutcome {
        let probabilities = self.probabilities(seed, shot);
        let spam = &self.env.noise.spam;
        let tag = rng::label("spam");
        let outcomes = probabilities
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let mut r = rng::stream(seed, &[tag, shot, j as u64]);
                apply_spam(p, spam, &mut r)
            })
            .collect();
        ShotOutcome { probabilities, outcomes }
    }

    /// Number of bright readouts per site over shots `0..n_shots`.
    pub fn count_excited(&self, seed: u64, n_shots: u64) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_sites];
        for shot in 0..n_shots {
            for (c, o) in counts.iter_mut().zip(self.run_shot(seed, shot).outcomes) {
                *c += u64::from(o);
            }
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{LaserNoiseParams, SpamParams};
    use crate::sequence::{build_parity_addressing, CompileOptions, Instruction};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn piecewise_detuning_integrates_segments() {
        let d = Detuning::Piecewise { start_us: 10.0, segment_us: 100.0, hz: vec![1.0, 3.0] };
        let expect = TAU * 1e-6 * (10.0 + 100.0 + 3.0 * 150.0);
        assert!((d.phase(260.0) - expect).abs() < 1e-15);
        assert_eq!(d.phase(0.0), 0.0);
    }

    #[test]
    fn parity_half_wave_matches_single_qubit_algebra() {
        let opts = CompileOptions::default();
        let seq = build_parity_addressing(4, 349.2, &opts).unwrap();
        let sim = Simulation::new(&seq, &Environment::noiseless()).unwrap();
        let p = sim.noiseless_probabilities();
        let moved = QubitState::ground().rotated(FRAC_PI_2, 0.0).apply_local_phase(PI).rotated(FRAC_PI_2, 0.0);
        let still = QubitState::ground().rotated(FRAC_PI_2, 0.0).rotated(FRAC_PI_2, 0.0);
        assert!((p[1] - moved.p_excited()).abs() < 1e-12 && p[1] < 1e-12);
        assert!((p[0] - still.p_excited()).abs() < 1e-12 && (p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_pipeline_is_deterministic_and_exact() {
        let seq = build_parity_addressing(3, 100.0, &CompileOptions::default()).unwrap();
        let mut env = Environment::noiseless();
        env.noise.laser = LaserNoiseParams::power_law(0.0, 0.59);
        let sim = Simulation::new(&seq, &env).unwrap();
        assert_eq!(sim.probabilities(1, 0), sim.probabilities(2, 7));
        let counts = sim.count_excited(3, 50);
        let p = sim.noiseless_probabilities();
        assert!(counts.iter().zip(&p).all(|(&c, &pi)| c <= 50 && (pi == 1.0) <= (c == 50)));
    }

    #[test]
    fn spam_streams_are_per_site() {
        let seq = build_parity_addressing(4, 0.0, &CompileOptions::default()).unwrap();
        let mut env = Environment::noiseless();
        env.noise.spam = SpamParams::default();
        env.noise.laser = LaserNoiseParams::power_law(std::f64::consts::PI * 0.117, 0.59);
        let a = Simulation::new(&seq, &env).unwrap();
        let mut seq2 = seq.clone();
        if let Instruction::LocalShift { moves, .. } = &mut seq2.instructions[1] {
            moves[0].1 = 123.0;
        }
        let b = Simulation::new(&seq2, &env).unwrap();
        for shot in 0..20 {
            let (ra, rb) = (a.run_shot(5, shot), b.run_shot(5, shot));
            for j in [0, 2] {
                assert_eq!(ra.probabilities[j].to_bits(), rb.probabilities[j].to_bits());
                assert_eq!(ra.outcomes[j], rb.outcomes[j]);
            }
        }
    }

    #[test]
    fn invalid_sequences_are_rejected() {
        let mut seq = PulseSequence::new(1);
        seq.push(Instruction::LocalShift { moves: vec![(3, 1.0)], shift_time: 30.0 });
        assert!(Simulation::new(&seq, &Environment::noiseless()).is_err());
    }
}
