//! Experiment runners. Each kind turns a validated configuration into a
//! result table and a report.

mod dual_quadrature;
mod kernel;
mod local_dd;
mod parity;
mod pattern;
mod slip;
mod tomography;

use multiclock::estimation::ShotTable;
use multiclock::rng;
use multiclock::sequence::PulseSequence;
use multiclock::simulate::{Detuning, Environment, Simulation};

use crate::config::{ExperimentConfig, ExperimentKind, Validated};
use crate::error::{HarnessError, HarnessResult};
use crate::report::Report;
use crate::table::ResultTable;

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub report: Report,
    /// A representative compiled sequence.
    pub sequence: Option<PulseSequence>,
    pub shot_table: Option<ShotTable>,
}

/// Runs a validated experiment. Deterministic in `(config, seed)`.
pub fn run(config: &ExperimentConfig, v: &Validated) -> HarnessResult<RunOutput> {
    let mut ctx = Context {
        config,
        v,
        table: ResultTable::new(),
        report: Report::new(v.kind.name(), v.seed),
        sequence: None,
        shot_table: None,
    };
    ctx.echo_parameters();
    match v.kind {
        ExperimentKind::ParitySweep => parity::run(&mut ctx)?,
        ExperimentKind::PhasePattern => pattern::run(&mut ctx)?,
        ExperimentKind::CardinalTomography => tomography::run(&mut ctx)?,
        ExperimentKind::DualQuadrature => dual_quadrature::run(&mut ctx)?,
        ExperimentKind::LocalDd => local_dd::run(&mut ctx)?,
        ExperimentKind::KernelSchedule => kernel::run(&mut ctx)?,
        ExperimentKind::MultiEnsembleSlip => slip::run(&mut ctx)?,
    }
    Ok(RunOutput { table: ctx.table, report: ctx.report, sequence: ctx.sequence, shot_table: ctx.shot_table })
}

pub(crate) struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub v: &'a Validated,
    pub table: ResultTable,
    pub report: Report,
    pub sequence: Option<PulseSequence>,
    pub shot_table: Option<ShotTable>,
}

impl Context<'_> {
    pub fn name(&self) -> &'static str {
        self.v.kind.name()
    }

    fn echo_parameters(&mut self) {
        let v = self.v;
        self.report.param("shots", v.shots);
        if let Some(n) = v.array_size {
            self.report.param("array_size", n);
        }
        if !v.kind.simulates() {
            return;
        }
        let d = v.compile.drive;
        self.report.param("drive.wavelength_nm", d.wavelength_nm);
        self.report.param("drive.rabi_frequency_hz", d.rabi_frequency_hz);
        self.report.param("drive.distance_scale_error", d.distance_scale_error);
        let l = v.noise.laser;
        self.report.param("noise.kind", l.kind);
        self.report.param("noise.beta", l.beta);
        self.report.param("noise.alpha", l.alpha);
        self.report.param("noise.correlation_time", l.correlation_time);
        self.report.param("noise.time_unit_us", l.time_unit_us);
        self.report.param("noise.pulse_infidelity_per_pi", v.noise.pulse_infidelity_per_pi);
        let s = v.noise.spam;
        self.report.param("spam.survival", s.survival);
        self.report.param("spam.detect", s.detect);
        self.report.param("spam.eject", s.eject);
        self.report.param("spam.readout_pulse_fidelity", s.readout_pulse_fidelity);
        let t = v.compile.timing;
        self.report.param("timing.finite_pulses", t.finite_pulses);
        self.report.param("timing.shift_time_us", t.shift_time_us);
        self.report.param("timing.pad_us", t.pad_us);
        self.report.param("timing.flip_mode", v.compile.flip_mode.as_str());
    }

    pub fn environment(&self, detuning: Detuning) -> Environment {
        Environment { drive: self.v.compile.drive, noise: self.v.noise, detuning }
    }

    pub fn simulation(&self, seq: &PulseSequence, detuning: Detuning) -> HarnessResult<Simulation> {
        Ok(Simulation::new(seq, &self.environment(detuning))?)
    }

    /// Root seed of sweep point `index`, distinct per experiment kind.
    pub fn point_seed(&self, index: usize) -> u64 {
        rng::derive_seed(self.v.seed, &[rng::label(self.name()), index as u64])
    }

    pub fn keep_sequence(&mut self, seq: &PulseSequence) {
        if self.sequence.is_none() {
            self.sequence = Some(seq.clone());
        }
    }

    pub fn shots(&self) -> u64 {
        self.v.shots
    }
}

/// Sum of `counts` over `sites`, with the matching sample size.
pub(crate) fn pooled(counts: &[u64], sites: &[usize], shots: u64) -> (u64, u64) {
    (sites.iter().map(|&s| counts[s]).sum(), shots * sites.len() as u64)
}

pub(crate) fn missing(what: &str) -> HarnessError {
    HarnessError::Runtime(format!("validated configuration lacks {what}"))
}
