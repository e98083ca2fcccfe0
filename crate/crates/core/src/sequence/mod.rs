//! Pulse-sequence IR over a site array, protocol compilers and timing
//! analysis.
//!
//! A [`PulseSequence`] is an ordered list of [`Instruction`]s executed back
//! to back; an instruction starts when the previous one ends. Durations are
//! in microseconds, move distances in nanometers.
//!
//! Ramsey-type builders measure the dark time `T` between the centres of the
//! first and last global quarter-turn pulses, and place every timed event
//! (pattern shifts, local π flips) by its centre relative to the first pulse
//! centre.

mod analysis;
mod build;
mod text;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimation::Quadrature;
use crate::qubit::{Basis, DriveParams};

pub use analysis::{effective_phase_fraction, flip_centres, validate, validate_with, Violation};
pub use build::{
    build_cardinal_array, build_cardinal_states, build_dual_quadrature, build_kernel_schedule, build_local_dd,
    build_parity_addressing, build_phase_pattern, reduce_move, with_measurement, CardinalState,
};

/// Minimum time for a local shift.
pub const DEFAULT_MIN_SHIFT_TIME_US: f64 = 20.0;
/// Default shift time.
pub const DEFAULT_SHIFT_TIME_US: f64 = 32.0;
/// Default wait appended after every shift to absorb timing jitter.
pub const DEFAULT_SHIFT_PAD_US: f64 = 34.0;

/// How local π flips are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipMode {
    /// Two global quarter-turns; the non-target sites are moved by `λ/2`
    /// between them (so their second quarter-turn undoes the first) and
    /// moved back afterwards.
    #[default]
    Composite,
    /// A π rotation applied to the target sites only.
    Ideal,
}

impl FlipMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FlipMode::Composite => "composite",
            FlipMode::Ideal => "ideal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    /// Global rotation by `angle` about the drive axis at `drive_phase`.
    GlobalPulse { angle: f64, drive_phase: f64, duration: f64 },
    /// Simultaneous moves `(site, Δx)`; absent sites stay put.
    LocalShift { moves: Vec<(usize, f64)>, shift_time: f64 },
    Wait { duration: f64 },
    /// Local π flip on `sites`. For [`FlipMode::Composite`],
    /// `pulse_duration` is the quarter-turn length and `shift_nm` the
    /// non-target move; for [`FlipMode::Ideal`] it is the π-pulse length and
    /// `shift_time`, `pad`, `shift_nm` are unused.
    LocalPiFlip { sites: Vec<usize>, mode: FlipMode, pulse_duration: f64, shift_time: f64, pad: f64, shift_nm: f64 },
    /// Readout basis per site.
    Measure { bases: Vec<Basis> },
}

impl Instruction {
    pub fn duration(&self) -> f64 {
        match self {
            Instruction::GlobalPulse { duration, .. } | Instruction::Wait { duration } => *duration,
            Instruction::LocalShift { shift_time, .. } => *shift_time,
            Instruction::LocalPiFlip { mode: FlipMode::Composite, pulse_duration, shift_time, pad, .. } => {
                2.0 * (pulse_duration + shift_time + pad)
            }
            Instruction::LocalPiFlip { mode: FlipMode::Ideal, pulse_duration, .. } => *pulse_duration,
            Instruction::Measure { .. } => 0.0,
        }
    }

    /// Offset of the instruction's effective centre from its start. For a
    /// composite flip this is the midpoint between its two quarter-turns.
    pub fn centre_offset(&self) -> f64 {
        match self {
            Instruction::LocalPiFlip { mode: FlipMode::Composite, pulse_duration, shift_time, pad, .. } => {
                pulse_duration + 0.5 * (shift_time + pad)
            }
            other => 0.5 * other.duration(),
        }
    }

    /// Move distance of `site` in a shift, zero for unlisted sites.
    pub fn shift_of(&self, site: usize) -> f64 {
        match self {
            Instruction::LocalShift { moves, .. } => moves.iter().filter(|m| m.0 == site).map(|m| m.1).sum(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub array_size: usize,
    pub instructions: Vec<Instruction>,
}

impl PulseSequence {
    pub fn new(array_size: usize) -> Self {
        Self { array_size, instructions: Vec::new() }
    }

    pub fn push(&mut self, instruction: Instruction) -> &mut Self {
        self.instructions.push(instruction);
        self
    }

    pub fn total_time(&self) -> f64 {
        self.instructions.iter().map(Instruction::duration).sum()
    }

    /// Start time of each instruction.
    pub fn start_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.instructions
            .iter()
            .map(|i| {
                let s = t;
                t += i.duration();
                s
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        text::to_text(self)
    }

    pub fn parse(input: &str) -> Result<Self> {
        text::parse(input)
    }
}

/// Instruction timing used by the compilers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    /// Pulse durations follow from the Rabi frequency; otherwise pulses are
    /// instantaneous.
    pub finite_pulses: bool,
    pub shift_time_us: f64,
    pub pad_us: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self { finite_pulses: true, shift_time_us: DEFAULT_SHIFT_TIME_US, pad_us: DEFAULT_SHIFT_PAD_US }
    }
}

impl TimingParams {
    /// Instantaneous pulses and shifts.
    pub fn ideal() -> Self {
        Self { finite_pulses: false, shift_time_us: 0.0, pad_us: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shift_time_us >= 0.0 && self.shift_time_us.is_finite()) {
            return Err(invalid(format!("shift_time_us must be >= 0, got {}", self.shift_time_us)));
        }
        if !(self.pad_us >= 0.0 && self.pad_us.is_finite()) {
            return Err(invalid(format!("pad_us must be >= 0, got {}", self.pad_us)));
        }
        Ok(())
    }
}

/// Settings shared by all compilers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompileOptions {
    pub drive: DriveParams,
    pub timing: TimingParams,
    pub flip_mode: FlipMode,
}

impl CompileOptions {
    /// Instantaneous pulses and shifts with ideal flips.
    pub fn ideal() -> Self {
        Self { drive: DriveParams::default(), timing: TimingParams::ideal(), flip_mode: FlipMode::Ideal }
    }

    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        self.timing.validate()
    }

    pub(crate) fn pulse(&self, angle: f64, drive_phase: f64) -> Instruction {
        let duration = if self.timing.finite_pulses { self.drive.pulse_duration_us(angle) } else { 0.0 };
        Instruction::GlobalPulse { angle, drive_phase, duration }
    }

    /// Shift followed by the jitter pad.
    pub(crate) fn shift_block(&self, moves: Vec<(usize, f64)>) -> Vec<Instruction> {
        let mut v = vec![Instruction::LocalShift { moves, shift_time: self.timing.shift_time_us }];
        if self.timing.pad_us > 0.0 {
            v.push(Instruction::Wait { duration: self.timing.pad_us });
        }
        v
    }

    pub(crate) fn shift_block_duration(&self) -> f64 {
        self.timing.shift_time_us + self.timing.pad_us
    }

    pub(crate) fn flip(&self, sites: Vec<usize>) -> Instruction {
        let finite = self.timing.finite_pulses;
        match self.flip_mode {
            FlipMode::Composite => Instruction::LocalPiFlip {
                sites,
                mode: FlipMode::Composite,
                pulse_duration: if finite { self.drive.pulse_duration_us(std::f64::consts::FRAC_PI_2) } else { 0.0 },
                shift_time: self.timing.shift_time_us,
                pad: self.timing.pad_us,
                shift_nm: 0.5 * self.drive.wavelength_nm,
            },
            FlipMode::Ideal => Instruction::LocalPiFlip {
                sites,
                mode: FlipMode::Ideal,
                pulse_duration: if finite { self.drive.pulse_duration_us(std::f64::consts::PI) } else { 0.0 },
                shift_time: 0.0,
                pad: 0.0,
                shift_nm: 0.0,
            },
        }
    }
}

/// Assignment of sites to ensembles and quadrature sub-ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleLayout {
    ensemble: Vec<usize>,
    quadrature: Vec<Quadrature>,
}

impl EnsembleLayout {
    /// Every `(ensemble, quadrature)` cell for ensembles `0..M` must be
    /// non-empty, where `M − 1` is the largest ensemble index.
    pub fn new(ensemble: Vec<usize>, quadrature: Vec<Quadrature>) -> Result<Self> {
        if ensemble.len() != quadrature.len() {
            return Err(invalid("ensemble and quadrature assignments differ in length"));
        }
        if ensemble.is_empty() {
            return Err(invalid("layout has no sites"));
        }
        let m = ensemble.iter().max().unwrap() + 1;
        for e in 0..m {
            for q in [Quadrature::X, Quadrature::Y] {
                if !ensemble.iter().zip(&quadrature).any(|(&ei, &qi)| ei == e && qi == q) {
                    return Err(invalid(format!("ensemble {e} has no {q:?}-quadrature sites")));
                }
            }
        }
        Ok(Self { ensemble, quadrature })
    }

    /// `M` contiguous blocks of sites; even sites read `X`, odd sites `Y`.
    pub fn blocks(n_sites: usize, n_ensembles: usize) -> Result<Self> {
        if n_ensembles == 0 || n_sites < 2 * n_ensembles {
            return Err(invalid(format!("{n_sites} sites cannot hold {n_ensembles} dual-quadrature ensembles")));
        }
        let ensemble = (0..n_sites).map(|j| j * n_ensembles / n_sites).collect();
        let quadrature = (0..n_sites).map(|j| if j % 2 == 0 { Quadrature::X } else { Quadrature::Y }).collect();
        Self::new(ensemble, quadrature)
    }

    pub fn n_sites(&self) -> usize {
        self.ensemble.len()
    }

    pub fn n_ensembles(&self) -> usize {
        self.ensemble.iter().max().map_or(0, |m| m + 1)
    }

    pub fn ensemble_of(&self, site: usize) -> usize {
        self.ensemble[site]
    }

    pub fn quadrature_of(&self, site: usize) -> Quadrature {
        self.quadrature[site]
    }

    pub fn sites(&self, ensemble: usize) -> Vec<usize> {
        (0..self.n_sites()).filter(|&j| self.ensemble[j] == ensemble).collect()
    }

    pub fn sites_in(&self, ensemble: usize, quadrature: Quadrature) -> Vec<usize> {
        (0..self.n_sites()).filter(|&j| self.ensemble[j] == ensemble && self.quadrature[j] == quadrature).collect()
    }
}

/// Flip timing of a compiled multi-ensemble schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivitySchedule {
    pub n_ensembles: usize,
    pub kernel_count: usize,
    /// µs
    pub kernel_length: f64,
    /// Flip centres of each ensemble as fractions of the dark time.
    pub flip_fractions: Vec<Vec<f64>>,
}

impl SensitivitySchedule {
    pub fn total_time(&self) -> f64 {
        self.kernel_count as f64 * self.kernel_length
    }

    /// Programmed phase fraction `2^{−m}` of ensemble `m`.
    pub fn target_fraction(m: usize) -> f64 {
        0.5f64.powi(m as i32)
    }

    /// Signed phase fraction implied by the flip fractions alone.
    pub fn phase_fraction(&self, m: usize) -> f64 {
        analysis::signed_fraction(&self.flip_fractions[m], 1.0)
    }
}
