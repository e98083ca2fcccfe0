//! Single-qubit states, drive pulses and movement-induced frame shifts.
//!
//! Basis ordering is `(|0⟩, |1⟩)` with `|0⟩` the ground state. The Bloch
//! sphere is oriented so that the excited state is `+Z` and the ground state
//! is `-Z`; a global pulse with drive phase `0` rotates about `+X` and takes
//! `|0⟩` to `+Y` after a quarter turn.

mod tomography;

pub use tomography::{state_fidelity, tomography_reconstruct, Basis, DensityMatrix, Tomography};

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};

/// Default clock-transition wavelength, nm.
pub const DEFAULT_WAVELENGTH_NM: f64 = 698.4;
/// Default Rabi frequency, Hz.
pub const DEFAULT_RABI_HZ: f64 = 2.5e3;

/// Pure single-qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub amp0: Complex64,
    pub amp1: Complex64,
}

impl QubitState {
    pub fn ground() -> Self {
        Self { amp0: Complex64::new(1.0, 0.0), amp1: Complex64::new(0.0, 0.0) }
    }

    pub fn excited() -> Self {
        Self { amp0: Complex64::new(0.0, 0.0), amp1: Complex64::new(1.0, 0.0) }
    }

    /// Normalizes the given amplitudes. Fails on a zero or non-finite vector.
    pub fn new(amp0: Complex64, amp1: Complex64) -> Result<Self> {
        let norm = (amp0.norm_sqr() + amp1.norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("state amplitudes must be finite and non-zero"));
        }
        Ok(Self { amp0: amp0 / norm, amp1: amp1 / norm })
    }

    /// State with the given Bloch direction (polar angle from `+Z`, azimuth
    /// from `+X`).
    pub fn from_bloch_angles(polar: f64, azimuth: f64) -> Self {
        // +Z is |1⟩ here, so the roles of the two amplitudes are swapped with
        // respect to the textbook parametrization.
        let amp1 = Complex64::new((polar / 2.0).cos(), 0.0);
        let amp0 = Complex64::from_polar((polar / 2.0).sin(), azimuth);
        Self { amp0, amp1 }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    /// `|amp1|²`.
    pub fn p_excited(&self) -> f64 {
        self.amp1.norm_sqr()
    }

    /// Bloch vector `(x, y, z)` with `z = P(|1⟩) - P(|0⟩)`.
    pub fn bloch_vector(&self) -> [f64; 3] {
        let c = self.amp0.conj() * self.amp1;
        [2.0 * c.re, -2.0 * c.im, self.amp1.norm_sqr() - self.amp0.norm_sqr()]
    }

    /// Global drive pulse of rotation `angle` about the equatorial axis set by
    /// `drive_phase`:
    /// `cos(angle/2)·I − i·sin(angle/2)·(cos(drive_phase)·σx + sin(drive_phase)·σy)`.
    pub fn rotate_global(self, angle: f64, drive_phase: f64) -> Result<Self> {
        ensure_finite("angle", angle)?;
        ensure_finite("drive_phase", drive_phase)?;
        Ok(self.rotated(angle, drive_phase))
    }

    pub(crate) fn rotated(self, angle: f64, drive_phase: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        let minus_i_s = Complex64::new(0.0, -s);
        let e = Complex64::from_polar(1.0, drive_phase);
        Self {
            amp0: self.amp0 * c + minus_i_s * e.conj() * self.amp1,
            amp1: minus_i_s * e * self.amp0 + self.amp1 * c,
        }
    }

    /// Advances the relative phase by `phi`: `amp1 → amp1·e^{−iφ}`.
    ///
    /// This is the state-picture image of a drive-frame offset: a pulse with
    /// drive phase `p` after a frame offset `phi` produces the same
    /// populations as `apply_local_phase(phi)` followed by a pulse with phase
    /// `p`.
    pub fn apply_local_phase(self, phi: f64) -> Self {
        Self { amp0: self.amp0, amp1: self.amp1 * Complex64::from_polar(1.0, -phi) }
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &QubitState) -> f64 {
        (self.amp0.conj() * other.amp0 + self.amp1.conj() * other.amp1).norm_sqr()
    }
}

/// Atom position along the drive-beam axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SitePosition {
    pub site_index: usize,
    /// nm
    pub x: f64,
}

/// Global drive laser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveParams {
    pub wavelength_nm: f64,
    pub rabi_frequency_hz: f64,
    /// Fractional error of the move-distance calibration: a commanded move of
    /// `Δx` displaces the atom by `Δx·(1 + distance_scale_error)`.
    #[serde(default)]
    pub distance_scale_error: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self {
            wavelength_nm: DEFAULT_WAVELENGTH_NM,
            rabi_frequency_hz: DEFAULT_RABI_HZ,
            distance_scale_error: 0.0,
        }
    }
}

impl DriveParams {
    pub fn new(wavelength_nm: f64, rabi_frequency_hz: f64) -> Result<Self> {
        let d = Self { wavelength_nm, rabi_frequency_hz, distance_scale_error: 0.0 };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_nm.is_finite() && self.wavelength_nm > 0.0) {
            return Err(invalid(format!("wavelength_nm must be > 0, got {}", self.wavelength_nm)));
        }
        if !(self.rabi_frequency_hz.is_finite() && self.rabi_frequency_hz > 0.0) {
            return Err(invalid(format!(
                "rabi_frequency_hz must be > 0, got {}",
                self.rabi_frequency_hz
            )));
        }
        ensure_finite("distance_scale_error", self.distance_scale_error)
    }

    /// Wavevector `2π/λ`, rad/nm.
    pub fn wavevector(&self) -> f64 {
        TAU / self.wavelength_nm
    }

    /// Duration of a pulse of the given rotation angle, µs.
    pub fn pulse_duration_us(&self, angle: f64) -> f64 {
        angle.abs() / (TAU * self.rabi_frequency_hz) * 1e6
    }

    /// Move distance producing frame phase `phi`, without reduction.
    pub fn move_for_phase(&self, phi: f64) -> f64 {
        phi / self.wavevector()
    }
}

/// Frame phase `k·Δx` imprinted by a move of `delta_x_nm`, not reduced mod 2π.
pub fn phase_shift_from_move(delta_x_nm: f64, drive: &DriveParams) -> Result<f64> {
    drive.validate()?;
    ensure_finite("delta_x_nm", delta_x_nm)?;
    Ok(delta_x_nm * drive.wavevector())
}

/// Number of `|1⟩` outcomes in `n_shots` projective measurements.
pub fn measure_population(state: &QubitState, n_shots: u64, seed: u64) -> Result<u64> {
    let mut rng = crate::rng::stream(seed, &[]);
    sample_count(state.p_excited(), n_shots, &mut rng)
}

/// Binomial draw with success probability `p`.
pub fn sample_count<R: Rng + ?Sized>(p: f64, n_shots: u64, rng: &mut R) -> Result<u64> {
    if n_shots == 0 {
        return Err(invalid("n_shots must be >= 1"));
    }
    let p = p.clamp(0.0, 1.0);
    let dist = Binomial::new(n_shots, p).map_err(|e| invalid(e.to_string()))?;
    Ok(dist.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn populations(s: &QubitState) -> (f64, f64) {
        (s.amp0.norm_sqr(), s.amp1.norm_sqr())
    }

    #[test]
    fn pi_pulse_flips_ground_state() {
        let s = QubitState::ground().rotate_global(PI, 0.0).unwrap();
        assert_abs_diff_eq!(s.p_excited(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn half_pi_pulse_gives_equal_superposition() {
        let s = QubitState::ground().rotate_global(FRAC_PI_2, 0.0).unwrap();
        assert_abs_diff_eq!(s.p_excited(), 0.5, epsilon = 1e-15);
        let b = s.bloch_vector();
        assert_abs_diff_eq!(b[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_half_pi_pulses_compose_to_pi() {
        let s = QubitState::ground()
            .rotate_global(FRAC_PI_2, 0.0)
            .and_then(|s| s.rotate_global(FRAC_PI_2, 0.0))
            .unwrap();
        assert_abs_diff_eq!(s.p_excited(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_pulse_arguments_rejected() {
        assert!(QubitState::ground().rotate_global(f64::NAN, 0.0).is_err());
        assert!(QubitState::ground().rotate_global(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn move_phase_examples() {
        let d = DriveParams::default();
        assert_abs_diff_eq!(phase_shift_from_move(349.2, &d).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(phase_shift_from_move(698.4, &d).unwrap(), 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(phase_shift_from_move(174.6, &d).unwrap(), FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(d.wavevector() * d.wavelength_nm, 2.0 * PI, epsilon = 0.0);
        let bad = DriveParams { wavelength_nm: 0.0, ..d };
        assert!(phase_shift_from_move(1.0, &bad).is_err());
    }

    #[test]
    fn local_phase_examples() {
        let plus = QubitState::new(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        let minus = QubitState::new(Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)).unwrap();
        let shifted = plus.apply_local_phase(PI);
        assert_abs_diff_eq!(shifted.overlap(&minus), 1.0, epsilon = 1e-15);
        assert_eq!(plus.apply_local_phase(0.0), plus);
    }

    #[test]
    fn moved_atom_returns_to_ground() {
        let ramsey = |phi: f64| {
            QubitState::ground()
                .rotated(FRAC_PI_2, 0.0)
                .apply_local_phase(phi)
                .rotated(FRAC_PI_2, 0.0)
                .p_excited()
        };
        assert_abs_diff_eq!(ramsey(PI), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ramsey(0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn measurement_sampling() {
        assert_eq!(measure_population(&QubitState::excited(), 100, 1).unwrap(), 100);
        assert_eq!(measure_population(&QubitState::ground(), 100, 1).unwrap(), 0);
        assert!(measure_population(&QubitState::ground(), 0, 1).is_err());
        let s = QubitState::ground().rotated(FRAC_PI_2, 0.0);
        let n = 1_000_000;
        let frac = measure_population(&s, n, 42).unwrap() as f64 / n as f64;
        // 5 binomial standard errors: 5 * sqrt(0.25 / 1e6) = 0.0025
        assert!((frac - 0.5).abs() < 0.0025, "{frac}");
        assert_eq!(measure_population(&s, 1000, 9).unwrap(), measure_population(&s, 1000, 9).unwrap());
    }

    fn arb_state() -> impl Strategy<Value = QubitState> {
        (0.0..PI, -PI..PI).prop_map(|(p, a)| QubitState::from_bloch_angles(p, a))
    }

    proptest! {
        #[test]
        fn norm_preserved(s in arb_state(), angle in -10.0..10.0f64, phase in -10.0..10.0f64, phi in -10.0..10.0f64) {
            let r = s.rotate_global(angle, phase).unwrap();
            prop_assert!((r.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!((s.apply_local_phase(phi).norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn move_then_pulse_equals_advanced_drive_phase(
            s in arb_state(), dx in -2000.0..2000.0f64, angle in -7.0..7.0f64, phase in -4.0..4.0f64
        ) {
            let d = DriveParams::default();
            let phi = phase_shift_from_move(dx, &d).unwrap();
            let a = s.apply_local_phase(phi).rotated(angle, phase);
            let b = s.rotated(angle, phase + phi);
            let (a0, a1) = populations(&a);
            let (b0, b1) = populations(&b);
            prop_assert!((a0 - b0).abs() < 1e-12 && (a1 - b1).abs() < 1e-12);
        }

        #[test]
        fn local_phase_is_2pi_periodic(s in arb_state(), phi in -10.0..10.0f64) {
            let a = s.apply_local_phase(phi);
            let b = s.apply_local_phase(phi + 2.0 * PI);
            prop_assert!((a.overlap(&b) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn half_pi_pulses_compose(s in arb_state(), phase in -4.0..4.0f64) {
            let a = s.rotated(FRAC_PI_2, phase).rotated(FRAC_PI_2, phase);
            let b = s.rotated(PI, phase);
            prop_assert!((a.p_excited() - b.p_excited()).abs() < 1e-12);
        }
    }
}
