use std::f64::consts::{PI, TAU};

use crate::error::{ensure_finite, Error, Result};
use crate::fit::{fit_sinusoid, levenberg_marquardt, LeastSquaresProblem, LmOptions};

use super::ShotRecord;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// `arg(z_x + i·z_y)` on `(−π, π]`.
pub fn estimate_phase_from_contrasts(zx: f64, zy: f64) -> Result<f64> {
    if zx == 0.0 && zy == 0.0 {
        return Err(Error::UndefinedPhase);
    }
    // atan2 returns −π for (−1, −0.0); fold that onto +π.
    let a = zy.atan2(zx);
    Ok(if a == -PI { PI } else { a })
}

/// Dual-quadrature phase estimate of one shot: `arg((2P_x − 1) + i(2P_y − 1))`.
pub fn estimate_phase(record: &ShotRecord) -> Result<f64> {
    estimate_phase_from_contrasts(2.0 * record.p_x - 1.0, 2.0 * record.p_y - 1.0)
}

/// Single-quadrature inversion `arcsin(z_y)`, invertible only on `[−π/2, π/2]`.
pub fn estimate_single_basis(p_y: f64) -> f64 {
    (2.0 * p_y - 1.0).clamp(-1.0, 1.0).asin()
}

/// Deviation of a shot phase from the mean phase, wrapped into `(−π, π]`.
pub fn phase_deviation(theta: f64, theta_mean: f64) -> f64 {
    wrap_phase(theta - theta_mean)
}

/// Joint decaying-sinusoid fit of both quadratures:
/// `P̄_q(t) = 0.5 + A_q·exp(−(γt)^p)·cos(2πft + φ_q)`.
///
/// The envelope is shared, so the mean phase `arg(z̄_x + i·z̄_y)` does not
/// depend on it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPhaseCurve {
    pub amplitude_x: f64,
    pub phase_x: f64,
    pub amplitude_y: f64,
    pub phase_y: f64,
    pub frequency: f64,
    pub decay_rate: f64,
    pub decay_shape: f64,
    /// Distinct times in ascending order with their mean phase.
    pub times: Vec<f64>,
    pub theta_mean: Vec<f64>,
    pub rss: f64,
}

impl MeanPhaseCurve {
    fn envelope(&self, t: f64) -> f64 {
        envelope(self.decay_rate, self.decay_shape, t)
    }

    pub fn p_x(&self, t: f64) -> f64 {
        0.5 + self.amplitude_x * self.envelope(t) * (TAU * self.frequency * t + self.phase_x).cos()
    }

    pub fn p_y(&self, t: f64) -> f64 {
        0.5 + self.amplitude_y * self.envelope(t) * (TAU * self.frequency * t + self.phase_y).cos()
    }

    /// Mean phase at `t`, or 0 when the fitted contrast vanishes.
    pub fn theta_at(&self, t: f64) -> f64 {
        let zx = self.amplitude_x * (TAU * self.frequency * t + self.phase_x).cos();
        let zy = self.amplitude_y * (TAU * self.frequency * t + self.phase_y).cos();
        estimate_phase_from_contrasts(zx, zy).unwrap_or(0.0)
    }
}

fn envelope(rate: f64, shape: f64, t: f64) -> f64 {
    let x = rate.abs() * t;
    if x == 0.0 {
        1.0
    } else {
        (-x.powf(shape)).exp()
    }
}

struct JointFringe<'a> {
    t: &'a [f64],
    px: &'a [f64],
    py: &'a [f64],
}

impl LeastSquaresProblem for JointFringe<'_> {
    fn n_params(&self) -> usize {
        7
    }
    fn n_residuals(&self) -> usize {
        2 * self.t.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let n = self.t.len();
        let shape = p[6].clamp(0.3, 4.0);
        for i in 0..n {
            let t = self.t[i];
            let env = envelope(p[5], shape, t);
            let w = TAU * p[4] * t;
            out[i] = 0.5 + p[0] * env * (w + p[1]).cos() - self.px[i];
            out[n + i] = 0.5 + p[2] * env * (w + p[3]).cos() - self.py[i];
        }
    }
}

/// Mean phase `θ̄(t)` from shot records grouped by interrogation time.
///
/// Averages `P_x` and `P_y` per time, fits the joint decaying sinusoid and
/// inverts the fitted populations. Needs at least 4 distinct times.
pub fn mean_phase_curve(records: &[ShotRecord]) -> Result<MeanPhaseCurve> {
    let mut groups: Vec<(f64, f64, f64, usize)> = Vec::new();
    let mut sorted: Vec<&ShotRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    for r in sorted {
        ensure_finite("t", r.t)?;
        match groups.last_mut() {
            Some(g) if g.0 == r.t => {
                g.1 += r.p_x;
                g.2 += r.p_y;
                g.3 += 1;
            }
            _ => groups.push((r.t, r.p_x, r.p_y, 1)),
        }
    }
    if groups.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: groups.len() });
    }
    let t: Vec<f64> = groups.iter().map(|g| g.0).collect();
    let px: Vec<f64> = groups.iter().map(|g| g.1 / g.3 as f64).collect();
    let py: Vec<f64> = groups.iter().map(|g| g.2 / g.3 as f64).collect();

    // Start from the best undamped sinusoid of the stronger quadrature.
    let sx = fit_sinusoid(&t, &px, None)?;
    let sy = fit_sinusoid(&t, &py, None)?;
    let f0 = if sx.amplitude >= sy.amplitude { sx.frequency } else { sy.frequency };
    let ax = crate::fit::fit_sinusoid_at(&t, &px, f0);
    let ay = crate::fit::fit_sinusoid_at(&t, &py, f0);
    let span = t.last().unwrap() - t.first().unwrap();
    let problem = JointFringe { t: &t, px: &px, py: &py };

    let mut best: Option<crate::fit::LeastSquaresFit> = None;
    for rate0 in [0.0, 0.5 / span.max(1e-300), 2.0 / span.max(1e-300)] {
        let start = [ax.amplitude, ax.phase, ay.amplitude, ay.phase, f0, rate0, 1.5];
        if let Ok(fit) = levenberg_marquardt(&problem, &start, &LmOptions::default()) {
            if best.as_ref().is_none_or(|b| fit.rss < b.rss) {
                best = Some(fit);
            }
        }
    }
    let fit = best.ok_or_else(|| Error::Fit {
        reason: "decaying-sinusoid fit did not converge from any start".into(),
        iterations: 0,
        residual: f64::NAN,
    })?;
    let p = &fit.params;
    let mut curve = MeanPhaseCurve {
        amplitude_x: p[0],
        phase_x: p[1],
        amplitude_y: p[2],
        phase_y: p[3],
        frequency: p[4],
        decay_rate: p[5].abs(),
        decay_shape: p[6].clamp(0.3, 4.0),
        times: t.clone(),
        theta_mean: Vec::new(),
        rss: fit.rss,
    };
    // Canonical form: non-negative frequency and amplitudes.
    if curve.frequency < 0.0 {
        curve.frequency = -curve.frequency;
        curve.phase_x = -curve.phase_x;
        curve.phase_y = -curve.phase_y;
    }
    if curve.amplitude_x < 0.0 {
        curve.amplitude_x = -curve.amplitude_x;
        curve.phase_x += PI;
    }
    if curve.amplitude_y < 0.0 {
        curve.amplitude_y = -curve.amplitude_y;
        curve.phase_y += PI;
    }
    curve.phase_x = wrap_phase(curve.phase_x);
    curve.phase_y = wrap_phase(curve.phase_y);
    curve.theta_mean = t.iter().map(|&ti| curve.theta_at(ti)).collect();
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn rec(t: f64, p_x: f64, p_y: f64) -> ShotRecord {
        ShotRecord { t, p_x, p_y, n_x: 0, n_y: 0 }
    }

    #[test]
    fn estimate_examples() {
        assert_eq!(estimate_phase(&rec(0.0, 1.0, 0.5)).unwrap(), 0.0);
        assert!((estimate_phase(&rec(0.0, 0.5, 1.0)).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(estimate_phase(&rec(0.0, 0.0, 0.5)).unwrap(), PI);
        assert_eq!(estimate_phase(&rec(0.0, 0.5, 0.5)), Err(Error::UndefinedPhase));
    }

    #[test]
    fn deviation_examples() {
        assert_eq!(phase_deviation(1.2, 1.2), 0.0);
        assert!((phase_deviation(1.5 * PI, 0.0) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(phase_deviation(PI, 0.0), PI);
        assert_eq!(phase_deviation(0.0, PI), PI);
    }

    proptest! {
        #[test]
        fn dual_quadrature_inverts_full_range(theta in -PI..=PI) {
            let theta = if theta == -PI { PI } else { theta };
            let r = rec(0.0, 0.5 * (1.0 + theta.cos()), 0.5 * (1.0 + theta.sin()));
            let est = estimate_phase(&r).unwrap();
            prop_assert!((est - theta).abs() < 1e-12, "theta={} est={}", theta, est);
        }

        #[test]
        fn single_basis_aliases(theta in -PI..PI) {
            let mirrored = PI - theta;
            let a = estimate_single_basis(0.5 * (1.0 + theta.sin()));
            let b = estimate_single_basis(0.5 * (1.0 + mirrored.sin()));
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn wrap_is_in_range(x in -100.0..100.0f64) {
            let w = wrap_phase(x);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(((x - w) / TAU - ((x - w) / TAU).round()).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_fringes_give_linear_phase() {
        let delta = 0.8; // rad per time unit
        let records: Vec<ShotRecord> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.25;
                let th = delta * t;
                rec(t, 0.5 * (1.0 + th.cos()), 0.5 * (1.0 + th.sin()))
            })
            .collect();
        let curve = mean_phase_curve(&records).unwrap();
        for (t, th) in curve.times.iter().zip(&curve.theta_mean) {
            assert!(phase_deviation(*th, delta * t).abs() < 1e-6, "t={t} th={th}");
        }
    }

    #[test]
    fn constant_populations_give_zero_phase() {
        let records: Vec<ShotRecord> = (0..10).map(|i| rec(i as f64, 1.0, 0.5)).collect();
        let curve = mean_phase_curve(&records).unwrap();
        assert!(curve.theta_mean.iter().all(|th| th.abs() < 1e-6), "{:?}", curve.theta_mean);
    }

    #[test]
    fn too_few_times_rejected() {
        let records: Vec<ShotRecord> = (0..3).map(|i| rec(i as f64, 1.0, 0.5)).collect();
        assert!(matches!(mean_phase_curve(&records), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn synthetic_decaying_fringes_recover_frequency() {
        // 50 times x 200 shots of binomially sampled populations with a
        // Gaussian-decay envelope; truth f = 0.35.
        let f = 0.35;
        let mut rng = rng::stream(5, &[]);
        let n_atoms = 10u64;
        let mut records = Vec::new();
        for i in 0..50 {
            let t = 0.2 + i as f64 * 0.2;
            let c = (-(t / 12.0f64).powi(2)).exp();
            let th = TAU * f * t + 0.3;
            for _ in 0..200 {
                let kx = crate::qubit::sample_count(0.5 * (1.0 + c * th.cos()), n_atoms, &mut rng).unwrap();
                let ky = crate::qubit::sample_count(0.5 * (1.0 + c * th.sin()), n_atoms, &mut rng).unwrap();
                records.push(ShotRecord::from_counts(t, kx, n_atoms, ky, n_atoms).unwrap());
            }
        }
        let curve = mean_phase_curve(&records).unwrap();
        assert!((curve.frequency / f - 1.0).abs() < 0.005, "{}", curve.frequency);
    }
}
