//! Laser phase noise, projection noise and SPAM error channels.
//!
//! Laser-noise parameters are expressed in "fit units" of time: `beta` has
//! units of rad per (fit unit)^α, and one fit unit equals
//! [`LaserNoiseParams::time_unit_us`] microseconds. The default unit is one
//! millisecond.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimation::{estimate_phase_from_contrasts, wrap_phase};
use crate::rng::{self, StreamRng};

/// Generative model for the stochastic laser phase `θ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaserNoiseKind {
    /// `θ(t) = δf·t`, one Gaussian frequency offset (std `beta`) per shot.
    ShotToShotFrequency,
    /// `θ(t) = beta·W(t)`, a Wiener path.
    RandomWalkPhase,
    /// `θ(t) = beta·W(t^{2α})`: marginal std exactly `beta·t^α`.
    PowerLawSigma,
    /// Frequency redrawn (std `beta`) every `correlation_time`, held constant
    /// in between.
    PiecewiseFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserNoiseParams {
    pub kind: LaserNoiseKind,
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub correlation_time: Option<f64>,
    #[serde(default = "default_time_unit_us")]
    pub time_unit_us: f64,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_time_unit_us() -> f64 {
    1000.0
}

impl LaserNoiseParams {
    pub fn noiseless() -> Self {
        Self::power_law(0.0, 1.0)
    }

    pub fn power_law(beta: f64, alpha: f64) -> Self {
        Self {
            kind: LaserNoiseKind::PowerLawSigma,
            beta,
            alpha,
            correlation_time: None,
            time_unit_us: default_time_unit_us(),
        }
    }

    pub fn shot_to_shot(sigma_f: f64) -> Self {
        Self { kind: LaserNoiseKind::ShotToShotFrequency, ..Self::power_law(sigma_f, 1.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.time_unit_us.is_finite() && self.time_unit_us > 0.0) {
            return Err(invalid(format!("time_unit_us must be > 0, got {}", self.time_unit_us)));
        }
        if self.kind == LaserNoiseKind::PowerLawSigma && !(self.alpha > 0.0 && self.alpha <= 1.5) {
            return Err(invalid(format!("alpha must lie in (0, 1.5], got {}", self.alpha)));
        }
        match (self.kind, self.correlation_time) {
            (LaserNoiseKind::PiecewiseFrequency, None) => {
                Err(invalid("piecewise-frequency noise requires correlation_time"))
            }
            (_, Some(c)) if !(c.is_finite() && c > 0.0) => {
                Err(invalid(format!("correlation_time must be > 0, got {c}")))
            }
            _ => Ok(()),
        }
    }

    /// Ensemble standard deviation of `θ(t)` predicted by the model.
    pub fn predicted_sigma(&self, t: f64) -> f64 {
        match self.kind {
            LaserNoiseKind::ShotToShotFrequency => self.beta * t,
            LaserNoiseKind::RandomWalkPhase => self.beta * t.sqrt(),
            LaserNoiseKind::PowerLawSigma => self.beta * t.powf(self.alpha),
            LaserNoiseKind::PiecewiseFrequency => {
                let c = self.correlation_time.unwrap_or(f64::INFINITY);
                let full = (t / c).floor();
                let rest = t - full * c;
                self.beta * (full * c * c + rest * rest).sqrt()
            }
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.beta == 0.0
    }
}

/// Sampled laser phase offset on a time grid (fit units).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrajectory {
    pub times: Vec<f64>,
    pub phase: Vec<f64>,
    pub seed: u64,
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        None => return Err(invalid("time grid is empty")),
        Some(&t0) if t0 != 0.0 => return Err(invalid(format!("time grid must start at 0, got {t0}"))),
        _ => {}
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("time grid must be finite and ascending"));
    }
    Ok(())
}

/// Laser phase trajectory on `t_grid` (fit units, ascending, starting at 0).
pub fn sample_trajectory(params: &LaserNoiseParams, t_grid: &[f64], seed: u64) -> Result<NoiseTrajectory> {
    params.validate()?;
    check_grid(t_grid)?;
    let mut rng = rng::stream(seed, &[]);
    let phase = sample_phases(params, t_grid, &mut rng);
    Ok(NoiseTrajectory { times: t_grid.to_vec(), phase, seed })
}

/// Core sampler. `t_grid` must be ascending with non-negative entries; the
/// phase at `t = 0` is zero.
pub(crate) fn sample_phases<R: Rng + ?Sized>(params: &LaserNoiseParams, t_grid: &[f64], rng: &mut R) -> Vec<f64> {
    if params.is_noiseless() {
        return vec![0.0; t_grid.len()];
    }
    let beta = params.beta;
    let mut gauss = || -> f64 { StandardNormal.sample(rng) };
    match params.kind {
        LaserNoiseKind::ShotToShotFrequency => {
            let df = beta * gauss();
            t_grid.iter().map(|t| df * t).collect()
        }
        LaserNoiseKind::RandomWalkPhase | LaserNoiseKind::PowerLawSigma => {
            let clock = |t: f64| match params.kind {
                LaserNoiseKind::RandomWalkPhase => t,
                _ => t.powf(2.0 * params.alpha),
            };
            let mut w = 0.0;
            let mut s_prev = 0.0;
            t_grid
                .iter()
                .map(|&t| {
                    let s = clock(t);
                    let ds = s - s_prev;
                    if ds > 0.0 {
                        w += ds.sqrt() * gauss();
                    }
                    s_prev = s;
                    beta * w
                })
                .collect()
        }
        LaserNoiseKind::PiecewiseFrequency => {
            let c = params.correlation_time.expect("validated");
            let mut freqs: Vec<f64> = Vec::new();
            t_grid
                .iter()
                .map(|&t| {
                    let needed = (t / c).floor() as usize + 1;
                    while freqs.len() < needed {
                        freqs.push(beta * gauss());
                    }
                    let full = needed - 1;
                    let whole: f64 = freqs[..full].iter().sum::<f64>() * c;
                    whole + freqs[full] * (t - full as f64 * c)
                })
                .collect()
        }
    }
}

/// State-preparation and measurement error channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpamParams {
    /// Atom survives imaging.
    pub survival: f64,
    /// Present atom is detected.
    pub detect: f64,
    /// Ground-state atom is ejected before imaging.
    pub eject: f64,
    /// Fidelity of the basis-change quarter-turn used for X/Y readout.
    pub readout_pulse_fidelity: f64,
}

impl Default for SpamParams {
    fn default() -> Self {
        Self { survival: 0.9995, detect: 0.9997, eject: 0.9967, readout_pulse_fidelity: 0.9982 }
    }
}

impl SpamParams {
    pub fn perfect() -> Self {
        Self { survival: 1.0, detect: 1.0, eject: 1.0, readout_pulse_fidelity: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("survival", self.survival),
            ("detect", self.detect),
            ("eject", self.eject),
            ("readout_pulse_fidelity", self.readout_pulse_fidelity),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    /// `P(read excited | excited)`.
    pub fn read_excited_given_excited(&self) -> f64 {
        self.survival * self.detect
    }

    /// `P(read excited | ground)`: ejection fails, then the atom survives
    /// imaging and is detected.
    pub fn read_excited_given_ground(&self) -> f64 {
        (1.0 - self.eject) * self.survival * self.detect
    }

    /// Expected measured excited fraction for ideal probability `p`.
    pub fn measured_probability(&self, p: f64) -> f64 {
        p * self.read_excited_given_excited() + (1.0 - p) * self.read_excited_given_ground()
    }

    pub fn is_perfect(&self) -> bool {
        *self == Self::perfect()
    }
}

/// Samples the true outcome from `p_ideal`, then passes it through the
/// error channel in physical order: ejection of ground-state atoms, survival
/// during imaging, detection.
pub fn apply_spam<R: Rng + ?Sized>(p_ideal: f64, spam: &SpamParams, rng: &mut R) -> bool {
    let excited = rng.random::<f64>() < p_ideal;
    if !excited && rng.random::<f64>() < spam.eject {
        return false;
    }
    rng.random::<f64>() < spam.survival && rng.random::<f64>() < spam.detect
}

/// Complete stochastic error model for a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub laser: LaserNoiseParams,
    pub spam: SpamParams,
    /// Depolarizing infidelity of a π rotation (finite temperature). A pulse
    /// of angle `a` shrinks the Bloch vector by `(1 − 2·p)^{a/π}`.
    #[serde(default)]
    pub pulse_infidelity_per_pi: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { laser: LaserNoiseParams::noiseless(), spam: SpamParams::perfect(), pulse_infidelity_per_pi: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.laser.validate()?;
        self.spam.validate()?;
        if !(0.0..=0.5).contains(&self.pulse_infidelity_per_pi) {
            return Err(invalid(format!(
                "pulse_infidelity_per_pi must lie in [0, 0.5], got {}",
                self.pulse_infidelity_per_pi
            )));
        }
        Ok(())
    }

    /// Bloch-vector shrink factor of a pulse with the given angle.
    pub fn pulse_shrink(&self, angle: f64) -> f64 {
        if self.pulse_infidelity_per_pi == 0.0 {
            1.0
        } else {
            (1.0 - 2.0 * self.pulse_infidelity_per_pi).powf(angle.abs() / PI)
        }
    }
}

/// Monte Carlo standard deviation of the dual-quadrature phase estimator due
/// to projection noise alone.
///
/// For each trial a true phase is drawn uniformly from `[−π, π)`, both
/// quadrature populations `(1 + C·cos θ)/2`, `(1 + C·sin θ)/2` are sampled
/// binomially with `n_atoms_per_quadrature` atoms, and the estimate is
/// compared with the truth. Trials whose sampled contrasts both vanish carry
/// no phase information and get a uniformly random estimate. Returns the RMS
/// wrapped deviation.
pub fn qpn_sigma_oracle(n_atoms_per_quadrature: u64, contrast: f64, n_trials: usize, seed: u64) -> Result<f64> {
    if n_atoms_per_quadrature == 0 {
        return Err(invalid("n_atoms_per_quadrature must be >= 1"));
    }
    if !(contrast > 0.0 && contrast <= 1.0) {
        return Err(invalid(format!("contrast must lie in (0, 1], got {contrast}")));
    }
    if n_trials < 10_000 {
        return Err(invalid(format!("n_trials must be >= 10^4, got {n_trials}")));
    }
    let n = n_atoms_per_quadrature;
    let mut rng: StreamRng = rng::stream(seed, &[rng::label("qpn-oracle")]);
    let mut sum_sq = 0.0;
    for _ in 0..n_trials {
        let theta = rng.random_range(-PI..PI);
        let px = 0.5 * (1.0 + contrast * theta.cos());
        let py = 0.5 * (1.0 + contrast * theta.sin());
        let kx = crate::qubit::sample_count(px, n, &mut rng)?;
        let ky = crate::qubit::sample_count(py, n, &mut rng)?;
        let zx = 2.0 * kx as f64 / n as f64 - 1.0;
        let zy = 2.0 * ky as f64 / n as f64 - 1.0;
        let estimate = match estimate_phase_from_contrasts(zx, zy) {
            Ok(v) => v,
            Err(_) => rng.random_range(-PI..PI),
        };
        let d = wrap_phase(estimate - theta);
        sum_sq += d * d;
    }
    Ok((sum_sq / n_trials as f64).sqrt())
}
