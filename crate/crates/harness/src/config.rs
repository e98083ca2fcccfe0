//! Experiment configuration files (TOML).
//!
//! Unknown keys anywhere are parse errors. Semantic checks run afterwards and
//! report every failure at once.

use std::fmt;
use std::path::{Path, PathBuf};

use multiclock::noise::{LaserNoiseKind, LaserNoiseParams, NoiseModel, SpamParams};
use multiclock::qubit::DriveParams;
use multiclock::sequence::{CompileOptions, FlipMode, TimingParams};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ParitySweep,
    PhasePattern,
    CardinalTomography,
    DualQuadrature,
    LocalDd,
    KernelSchedule,
    MultiEnsembleSlip,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ParitySweep => "parity-sweep",
            ExperimentKind::PhasePattern => "phase-pattern",
            ExperimentKind::CardinalTomography => "cardinal-tomography",
            ExperimentKind::DualQuadrature => "dual-quadrature",
            ExperimentKind::LocalDd => "local-dd",
            ExperimentKind::KernelSchedule => "kernel-schedule",
            ExperimentKind::MultiEnsembleSlip => "multi-ensemble-slip",
        }
    }

    /// Kinds that simulate pulse sequences and need the physical sections.
    pub fn simulates(self) -> bool {
        self != ExperimentKind::MultiEnsembleSlip
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Either explicit `values` or `points` evenly spaced values on
/// `[start, stop]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub values: Option<Vec<f64>>,
    /// Logarithmic spacing for `start`/`stop`/`points`.
    #[serde(default)]
    pub log: bool,
}

impl Grid {
    pub fn linear(start: f64, stop: f64, points: usize) -> Self {
        Self { start: Some(start), stop: Some(stop), points: Some(points), values: None, log: false }
    }

    pub fn resolve(&self) -> Result<Vec<f64>, String> {
        let v = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 {
                    return Err("points must be >= 1".into());
                }
                if self.log && !(a > 0.0 && b > 0.0) {
                    return Err("log grids need positive start and stop".into());
                }
                (0..n)
                    .map(|i| {
                        let u = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                        if self.log {
                            (a.ln() + u * (b.ln() - a.ln())).exp()
                        } else {
                            a + u * (b - a)
                        }
                    })
                    .collect()
            }
            _ => return Err("give either `values` or all of `start`, `stop`, `points`".into()),
        };
        if v.is_empty() {
            return Err("grid is empty".into());
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err("grid values must be finite".into());
        }
        Ok(v)
    }
}

/// Laser noise plus the per-pulse depolarizing term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: LaserNoiseKind,
    pub beta: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    pub correlation_time: Option<f64>,
    /// Laser-noise time unit in µs.
    #[serde(default = "thousand")]
    pub time_unit_us: f64,
    /// Depolarizing infidelity per π rotation.
    #[serde(default)]
    pub pulse_infidelity_per_pi: f64,
}

fn one() -> f64 {
    1.0
}

fn thousand() -> f64 {
    1000.0
}

impl NoiseSection {
    pub fn laser(&self) -> LaserNoiseParams {
        LaserNoiseParams {
            kind: self.kind,
            beta: self.beta,
            alpha: self.alpha,
            correlation_time: self.correlation_time,
            time_unit_us: self.time_unit_us,
        }
    }
}

/// SPAM channel. `preset` is `"perfect"` or `"measured"` (survival 0.9995,
/// detect 0.9997, eject 0.9967, readout quarter-turn 0.9982); explicit
/// fields override the preset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpamSection {
    pub preset: Option<String>,
    pub survival: Option<f64>,
    pub detect: Option<f64>,
    pub eject: Option<f64>,
    pub readout_pulse_fidelity: Option<f64>,
}

impl SpamSection {
    pub fn params(&self) -> Result<SpamParams, String> {
        let base = match self.preset.as_deref() {
            None | Some("measured") => SpamParams::default(),
            Some("perfect") => SpamParams::perfect(),
            Some(other) => return Err(format!("unknown spam preset `{other}` (expected perfect or measured)")),
        };
        let p = SpamParams {
            survival: self.survival.unwrap_or(base.survival),
            detect: self.detect.unwrap_or(base.detect),
            eject: self.eject.unwrap_or(base.eject),
            readout_pulse_fidelity: self.readout_pulse_fidelity.unwrap_or(base.readout_pulse_fidelity),
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    #[serde(default = "yes")]
    pub finite_pulses: bool,
    #[serde(default = "default_shift")]
    pub shift_time_us: f64,
    #[serde(default = "default_pad")]
    pub pad_us: f64,
    #[serde(default)]
    pub flip_mode: FlipMode,
}

fn yes() -> bool {
    true
}

fn default_shift() -> f64 {
    multiclock::sequence::DEFAULT_SHIFT_TIME_US
}

fn default_pad() -> f64 {
    multiclock::sequence::DEFAULT_SHIFT_PAD_US
}

impl Default for TimingSection {
    fn default() -> Self {
        Self { finite_pulses: true, shift_time_us: default_shift(), pad_us: default_pad(), flip_mode: FlipMode::Composite }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParitySection {
    /// Move distances in nm; defaults to 200 points on `[0, 2λ]`.
    pub delta_x_nm: Option<Grid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSection {
    /// Per-site frame rotation in radians; overrides `preset`.
    pub phases_rad: Option<Vec<f64>>,
    /// `"staircase"` (`j·π/4`) or `"parity"` (`π` on odd sites).
    pub preset: Option<String>,
    #[serde(default)]
    pub detuning_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    /// Prepare all six states in parallel (`"array"`) or one at a time
    /// (`"per-state"`).
    #[serde(default = "array")]
    pub layout: String,
}

fn array() -> String {
    "array".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualQuadratureSection {
    #[serde(default)]
    pub detuning_hz: f64,
    /// Fixed projection-noise width; computed by Monte Carlo from the atom
    /// number per quadrature when absent.
    pub sigma_qpn_rad: Option<f64>,
    #[serde(default = "qpn_trials")]
    pub qpn_trials: usize,
    /// Slip probabilities at which `T_max` is reported.
    pub epsilon: Option<Grid>,
    #[serde(default = "bins")]
    pub histogram_bins: usize,
    /// `"fit"`: decaying-sinusoid fit of the mean fringes; `"known"`: the
    /// programmed detuning.
    #[serde(default = "fit")]
    pub mean_phase: String,
    /// Also write the per-shot outcome table (`shots.csv`).
    #[serde(default)]
    pub write_shot_table: bool,
}

fn qpn_trials() -> usize {
    20_000
}

fn bins() -> usize {
    40
}

fn fit() -> String {
    "fit".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalDdSection {
    pub detuning_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub ensembles: usize,
    pub kernels: usize,
    /// One detuning per kernel, or a single value for all kernels.
    pub detuning_hz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlipSection {
    pub sigma_full_rad: Grid,
    pub ensembles: Vec<usize>,
    pub trials: u64,
    /// Per-ensemble estimation noise; from the projection-noise Monte Carlo
    /// at `atoms_per_quadrature` when absent (zero when both are absent).
    pub stage_sigma_rad: Option<f64>,
    pub atoms_per_quadrature: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: Option<u64>,
    /// Shots per sweep point.
    pub shots: Option<u64>,
    pub array_size: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub drive: Option<DriveParams>,
    pub noise: Option<NoiseSection>,
    pub spam: Option<SpamSection>,
    pub timing: Option<TimingSection>,
    /// Dark times (µs) for Ramsey-type kinds, kernel lengths for
    /// `kernel-schedule`.
    pub time_grid: Option<Grid>,
    pub parity: Option<ParitySection>,
    pub pattern: Option<PatternSection>,
    pub tomography: Option<TomographySection>,
    pub dual_quadrature: Option<DualQuadratureSection>,
    pub local_dd: Option<LocalDdSection>,
    pub kernel: Option<KernelSection>,
    pub slip: Option<SlipSection>,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> HarnessResult<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Parse { path: origin.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.shots.is_some() {
            self.shots = o.shots;
        }
        if o.output_dir.is_some() {
            self.output_dir = o.output_dir.clone();
        }
    }

    /// Checks everything and returns the resolved settings, or the full list
    /// of problems.
    pub fn validate(&self) -> HarnessResult<Validated> {
        let mut errs: Vec<String> = Vec::new();
        let kind = self.experiment;
        let seed = self.seed.unwrap_or_else(|| {
            errs.push("`seed` is mandatory".into());
            0
        });
        let mut need = |present: bool, what: &str| {
            if !present {
                errs.push(format!("{kind} requires {what}"));
            }
        };
        if kind.simulates() {
            need(self.shots.is_some(), "`shots`");
            need(self.drive.is_some(), "a [drive] section");
            need(self.noise.is_some(), "a [noise] section");
            need(self.spam.is_some(), "a [spam] section");
        }
        match kind {
            ExperimentKind::ParitySweep => need(self.array_size.is_some(), "`array_size`"),
            ExperimentKind::PhasePattern => {
                need(self.pattern.is_some(), "a [pattern] section");
                need(self.time_grid.is_some(), "a [time_grid] section");
            }
            ExperimentKind::CardinalTomography => {}
            ExperimentKind::DualQuadrature => {
                need(self.array_size.is_some(), "`array_size`");
                need(self.time_grid.is_some(), "a [time_grid] section");
                need(self.dual_quadrature.is_some(), "a [dual_quadrature] section");
            }
            ExperimentKind::LocalDd => {
                need(self.array_size.is_some(), "`array_size`");
                need(self.time_grid.is_some(), "a [time_grid] section");
                need(self.local_dd.is_some(), "a [local_dd] section");
            }
            ExperimentKind::KernelSchedule => {
                need(self.array_size.is_some(), "`array_size`");
                need(self.time_grid.is_some(), "a [time_grid] section");
                need(self.kernel.is_some(), "a [kernel] section");
            }
            ExperimentKind::MultiEnsembleSlip => need(self.slip.is_some(), "a [slip] section"),
        }
        if self.shots == Some(0) {
            errs.push("`shots` must be >= 1".into());
        }
        if let Some(n) = self.array_size {
            let min = match kind {
                ExperimentKind::LocalDd => 6,
                ExperimentKind::KernelSchedule => 2 * self.kernel.as_ref().map_or(2, |k| k.ensembles.max(1)),
                _ => 2,
            };
            if n < min {
                errs.push(format!("`array_size` must be >= {min} for {kind}, got {n}"));
            }
        }

        let drive = self.drive.unwrap_or_default();
        if let Err(e) = drive.validate() {
            errs.push(format!("[drive] {e}"));
        }
        let laser = self.noise.as_ref().map_or_else(LaserNoiseParams::noiseless, NoiseSection::laser);
        if let Err(e) = laser.validate() {
            errs.push(format!("[noise] {e}"));
        }
        let spam = match self.spam.as_ref().map(SpamSection::params) {
            Some(Ok(p)) => p,
            Some(Err(e)) => {
                errs.push(format!("[spam] {e}"));
                SpamParams::perfect()
            }
            None => SpamParams::perfect(),
        };
        let noise = NoiseModel {
            laser,
            spam,
            pulse_infidelity_per_pi: self.noise.as_ref().map_or(0.0, |n| n.pulse_infidelity_per_pi),
        };
        if let Err(e) = noise.validate() {
            if laser.validate().is_ok() && spam.validate().is_ok() {
                errs.push(format!("[noise] {e}"));
            }
        }
        let timing_section = self.timing.clone().unwrap_or_default();
        let timing = TimingParams {
            finite_pulses: timing_section.finite_pulses,
            shift_time_us: timing_section.shift_time_us,
            pad_us: timing_section.pad_us,
        };
        if let Err(e) = timing.validate() {
            errs.push(format!("[timing] {e}"));
        }
        let compile = CompileOptions { drive, timing, flip_mode: timing_section.flip_mode };

        let mut grid = |g: Option<&Grid>, name: &str, positive: bool| -> Vec<f64> {
            match g.map(Grid::resolve) {
                Some(Ok(v)) => {
                    if positive && v.iter().any(|&x| x < 0.0) {
                        errs.push(format!("{name}: values must be >= 0"));
                    }
                    v
                }
                Some(Err(e)) => {
                    errs.push(format!("{name}: {e}"));
                    Vec::new()
                }
                None => Vec::new(),
            }
        };
        let times = grid(self.time_grid.as_ref(), "[time_grid]", true);
        let parity_grid = grid(self.parity.as_ref().and_then(|p| p.delta_x_nm.as_ref()), "[parity] delta_x_nm", false);
        let eps = grid(self.dual_quadrature.as_ref().and_then(|d| d.epsilon.as_ref()), "[dual_quadrature] epsilon", true);
        let sigmas = grid(self.slip.as_ref().map(|s| &s.sigma_full_rad), "[slip] sigma_full_rad", true);

        if let Some(p) = &self.pattern {
            if p.phases_rad.is_none() && !matches!(p.preset.as_deref(), Some("staircase" | "parity")) {
                errs.push("[pattern] needs `phases_rad` or preset = \"staircase\" | \"parity\"".into());
            }
            if let (Some(ph), Some(n)) = (&p.phases_rad, self.array_size) {
                if ph.len() != n {
                    errs.push(format!("[pattern] phases_rad has {} entries for {n} sites", ph.len()));
                }
            }
            if p.phases_rad.is_some() && self.array_size.is_none() {
                // Array size follows from the phase list.
            } else if p.phases_rad.is_none() && self.array_size.is_none() {
                errs.push("phase-pattern presets require `array_size`".into());
            }
        }
        if let Some(t) = &self.tomography {
            if t.layout != "array" && t.layout != "per-state" {
                errs.push(format!("[tomography] layout must be \"array\" or \"per-state\", got `{}`", t.layout));
            }
        }
        if let Some(d) = &self.dual_quadrature {
            if d.mean_phase != "fit" && d.mean_phase != "known" {
                errs.push(format!("[dual_quadrature] mean_phase must be \"fit\" or \"known\", got `{}`", d.mean_phase));
            }
            if d.sigma_qpn_rad.is_some_and(|s| !(s >= 0.0)) {
                errs.push("[dual_quadrature] sigma_qpn_rad must be >= 0".into());
            }
            if d.sigma_qpn_rad.is_none() && d.qpn_trials < 10_000 {
                errs.push("[dual_quadrature] qpn_trials must be >= 10000".into());
            }
            if d.histogram_bins < 2 {
                errs.push("[dual_quadrature] histogram_bins must be >= 2".into());
            }
            if eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
                errs.push("[dual_quadrature] epsilon values must lie in (0, 1)".into());
            }
            if times.len() < 5 {
                errs.push("dual-quadrature needs at least 5 dark times".into());
            }
        }
        if let Some(k) = &self.kernel {
            if k.ensembles < 2 {
                errs.push("[kernel] ensembles must be >= 2".into());
            }
            if k.kernels == 0 {
                errs.push("[kernel] kernels must be >= 1".into());
            }
            if !(k.detuning_hz.len() == 1 || k.detuning_hz.len() == k.kernels) {
                errs.push(format!("[kernel] detuning_hz needs 1 or {} values, got {}", k.kernels, k.detuning_hz.len()));
            }
        }
        if let Some(s) = &self.slip {
            if s.ensembles.is_empty() || s.ensembles.iter().any(|&m| m == 0 || m > 20) {
                errs.push("[slip] ensembles must be a non-empty list of values in 1..=20".into());
            }
            if s.trials == 0 {
                errs.push("[slip] trials must be >= 1".into());
            }
            if s.stage_sigma_rad.is_some() && s.atoms_per_quadrature.is_some() {
                errs.push("[slip] give at most one of stage_sigma_rad and atoms_per_quadrature".into());
            }
            if s.stage_sigma_rad.is_some_and(|v| !(v >= 0.0)) {
                errs.push("[slip] stage_sigma_rad must be >= 0".into());
            }
            if s.atoms_per_quadrature == Some(0) {
                errs.push("[slip] atoms_per_quadrature must be >= 1".into());
            }
        }
        if matches!(kind, ExperimentKind::LocalDd | ExperimentKind::KernelSchedule | ExperimentKind::PhasePattern)
            && !times.is_empty()
            && times.len() < 4
        {
            errs.push(format!("{kind} needs at least 4 points in [time_grid]"));
        }

        if !errs.is_empty() {
            return Err(HarnessError::Validation(errs));
        }
        Ok(Validated {
            kind,
            seed,
            shots: self.shots.unwrap_or(0),
            array_size: self.array_size,
            compile,
            noise,
            times,
            parity_grid,
            epsilon: eps,
            slip_sigmas: sigmas,
            output_dir: self.output_dir.clone(),
        })
    }
}

/// Resolved settings of a valid configuration.
#[derive(Debug, Clone)]
pub struct Validated {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub shots: u64,
    pub array_size: Option<usize>,
    pub compile: CompileOptions,
    pub noise: NoiseModel,
    pub times: Vec<f64>,
    pub parity_grid: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub slip_sigmas: Vec<f64>,
    pub output_dir: Option<PathBuf>,
}
