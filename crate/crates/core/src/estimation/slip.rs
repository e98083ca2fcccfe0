//! Phase-slip probability, decay envelope, maximum interrogation time and
//! metrological gain, plus the σ(t) growth fit they are built on.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::{levenberg_marquardt, LeastSquaresProblem, LmOptions};
use crate::special::{erfc, erfc_inv};

/// Projection-noise width for ~9.5 atoms per quadrature (mean of the
/// 9- and 10-atom values, π×0.0934 and π×0.0897).
pub const DEFAULT_SIGMA_QPN: f64 = PI * 0.0915;

/// Half-width `B` of the invertible phase interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicRange(f64);

impl DynamicRange {
    /// Single-quadrature readout, `B = π/2`.
    pub const SINGLE_QUADRATURE: DynamicRange = DynamicRange(FRAC_PI_2);
    /// Dual-quadrature readout, `B = π`.
    pub const DUAL_QUADRATURE: DynamicRange = DynamicRange(PI);

    pub fn new(half_range: f64) -> Result<Self> {
        if half_range.is_finite() && half_range > 0.0 {
            Ok(Self(half_range))
        } else {
            Err(invalid(format!("dynamic range must be > 0, got {half_range}")))
        }
    }

    pub fn half_range(self) -> f64 {
        self.0
    }
}

/// `ε = erfc(B/(√2·σ))`; zero for `σ = 0`.
pub fn phase_slip_probability(sigma: f64, range: DynamicRange) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(erfc(range.0 / (SQRT_2 * sigma)))
}

/// Ramsey contrast `C = exp(−σ²/2)`.
pub fn decay_envelope(sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok((-0.5 * sigma * sigma).exp())
}

/// Sensitivity gain of dual- over single-quadrature readout in dB:
/// `10·log10(2^{1/(2α)})`.
pub fn metrological_gain_db(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be > 0, got {alpha}")));
    }
    Ok(10.0 * (2f64.log10() / (2.0 * alpha)))
}

/// Sensitivity gain in dB for a ratio of maximum interrogation times:
/// `10·log10(√ratio)`.
pub fn gain_db_from_tmax_ratio(ratio: f64) -> f64 {
    5.0 * ratio.log10()
}

/// Result of removing a projection-noise floor in quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpnSubtracted {
    pub sigma: f64,
    /// Set when `σ_total < σ_qpn` and the result was clamped to zero.
    pub clamped: bool,
}

/// `sqrt(max(σ_total² − σ_qpn², 0))`.
pub fn subtract_qpn(sigma_total: f64, sigma_qpn: f64) -> Result<QpnSubtracted> {
    if !(sigma_total >= 0.0 && sigma_qpn >= 0.0) {
        return Err(invalid("sigma values must be >= 0"));
    }
    let d = sigma_total * sigma_total - sigma_qpn * sigma_qpn;
    Ok(QpnSubtracted { sigma: d.max(0.0).sqrt(), clamped: d < 0.0 })
}

/// Fitted phase-spread growth `σ(t)² = (β·t^α)² + σ_qpn²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFit {
    pub beta: f64,
    pub alpha: f64,
    pub sigma_qpn: f64,
    /// Covariance of `(β, α)`; `None` when the fit is degenerate.
    pub covariance: Option<[[f64; 2]; 2]>,
    /// False when the data carry no information on `α` (e.g. `β̂ ≈ 0`).
    pub alpha_identifiable: bool,
}

impl PhaseFit {
    /// Noise-only fit with known parameters.
    pub fn new(beta: f64, alpha: f64, sigma_qpn: f64) -> Result<Self> {
        if !(beta >= 0.0 && alpha > 0.0 && sigma_qpn >= 0.0) {
            return Err(invalid(format!("invalid growth parameters beta={beta} alpha={alpha} sigma_qpn={sigma_qpn}")));
        }
        Ok(Self { beta, alpha, sigma_qpn, covariance: None, alpha_identifiable: true })
    }

    /// Laser-phase spread `β·t^α` (projection noise excluded).
    pub fn laser_sigma(&self, t: f64) -> f64 {
        self.beta * t.powf(self.alpha)
    }

    /// Total spread including projection noise.
    pub fn total_sigma(&self, t: f64) -> f64 {
        self.laser_sigma(t).hypot(self.sigma_qpn)
    }

    pub fn beta_stderr(&self) -> Option<f64> {
        self.covariance.map(|c| c[0][0].sqrt())
    }

    pub fn alpha_stderr(&self) -> Option<f64> {
        self.covariance.map(|c| c[1][1].sqrt())
    }
}

/// Longest interrogation time at which the laser-phase slip probability
/// stays at `ε`: `T_max = (B/(√2·β·erfc⁻¹(ε)))^{1/α}`.
pub fn t_max(epsilon: f64, fit: &PhaseFit, range: DynamicRange) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(fit.beta > 0.0) {
        return Err(invalid("t_max requires beta > 0"));
    }
    let x = erfc_inv(epsilon).expect("epsilon in (0, 1)");
    Ok((range.0 / (SQRT_2 * fit.beta * x)).powf(1.0 / fit.alpha))
}

struct Growth<'a> {
    t: &'a [f64],
    sigma: &'a [f64],
    sigma_qpn: f64,
}

impl LeastSquaresProblem for Growth<'_> {
    fn n_params(&self) -> usize {
        2
    }
    fn n_residuals(&self) -> usize {
        self.t.len()
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.t.len() {
            let laser = p[0] * self.t[i].powf(p[1]);
            out[i] = laser.hypot(self.sigma_qpn) - self.sigma[i];
        }
    }
    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        for i in 0..self.t.len() {
            let t = self.t[i];
            let ta = t.powf(p[1]);
            let laser = p[0] * ta;
            let total = laser.hypot(self.sigma_qpn);
            if total == 0.0 {
                out[(i, 0)] = 0.0;
                out[(i, 1)] = 0.0;
                continue;
            }
            // d/dβ and d/dα of sqrt((β t^α)² + q²)
            out[(i, 0)] = laser * ta / total;
            out[(i, 1)] = if t > 0.0 { laser * laser * t.ln() / total } else { 0.0 };
        }
    }
}

/// Least-squares fit of the spread growth `σ(t)` with `σ_qpn` held fixed.
///
/// Residuals are taken on `σ` itself. The start point comes from a log-log
/// regression of the projection-noise-subtracted spreads, so noiseless
/// power-law data are recovered to machine precision.
pub fn fit_sigma_growth(sigma_by_time: &[(f64, f64)], sigma_qpn: f64) -> Result<PhaseFit> {
    if sigma_by_time.len() < 5 {
        return Err(Error::InsufficientData { needed: 5, got: sigma_by_time.len() });
    }
    if !(sigma_qpn >= 0.0) {
        return Err(invalid("sigma_qpn must be >= 0"));
    }
    for &(t, s) in sigma_by_time {
        if !(t.is_finite() && t >= 0.0 && s.is_finite() && s >= 0.0) {
            return Err(invalid(format!("invalid point (t={t}, sigma={s})")));
        }
    }
    let t: Vec<f64> = sigma_by_time.iter().map(|p| p.0).collect();
    let sigma: Vec<f64> = sigma_by_time.iter().map(|p| p.1).collect();
    if t.iter().all(|&v| v == t[0]) {
        return Err(Error::Fit { reason: "all time points are equal".into(), iterations: 0, residual: f64::NAN });
    }

    let scale = sigma.iter().cloned().fold(sigma_qpn, f64::max).max(f64::MIN_POSITIVE);
    let laser: Vec<(f64, f64)> = t
        .iter()
        .zip(&sigma)
        .filter(|(&ti, _)| ti > 0.0)
        .map(|(&ti, &s)| (ti, (s * s - sigma_qpn * sigma_qpn).max(0.0).sqrt()))
        .filter(|&(_, l)| l > 1e-9 * scale)
        .collect();
    if laser.len() < 2 || laser.iter().all(|p| p.0 == laser[0].0) {
        return Ok(PhaseFit { beta: 0.0, alpha: 1.0, sigma_qpn, covariance: None, alpha_identifiable: false });
    }
    let (alpha0, beta0) = log_log_regression(&laser);

    let problem = Growth { t: &t, sigma: &sigma, sigma_qpn };
    let fit = levenberg_marquardt(&problem, &[beta0, alpha0], &LmOptions::default())?;
    let (beta, alpha) = (fit.params[0].abs(), fit.params[1]);
    let covariance = fit.covariance.map(|c| [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]]);
    let beta_negligible = beta * t.iter().cloned().fold(0.0, f64::max).powf(alpha.max(0.0)) < 1e-9 * scale;
    let alpha_identifiable = alpha > 0.0
        && !beta_negligible
        && covariance.is_some_and(|c| c[1][1].is_finite() && c[1][1].sqrt() < alpha.abs());
    if !(alpha > 0.0) {
        return Err(Error::Fit { reason: format!("fitted alpha {alpha} is not positive"), iterations: fit.iterations, residual: fit.rss });
    }
    Ok(PhaseFit { beta, alpha, sigma_qpn, covariance, alpha_identifiable })
}

fn log_log_regression(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, (my - slope * mx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    const BETA: f64 = PI * 0.117;
    const ALPHA: f64 = 0.59;

    /// `2∫_B^∞ N(x; 0, σ) dx` by composite Simpson.
    fn tail_by_quadrature(sigma: f64, b: f64) -> f64 {
        let upper = b + 40.0 * sigma;
        let n = 200_000;
        let h = (upper - b) / n as f64;
        let f = |x: f64| (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
        let mut s = f(b) + f(upper);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(b + i as f64 * h);
        }
        2.0 * s * h / 3.0
    }

    #[test]
    fn slip_probability_examples() {
        assert_eq!(phase_slip_probability(0.0, DynamicRange::DUAL_QUADRATURE).unwrap(), 0.0);
        let eps = phase_slip_probability(FRAC_PI_2, DynamicRange::DUAL_QUADRATURE).unwrap();
        let oracle = tail_by_quadrature(FRAC_PI_2, PI);
        assert!((eps - oracle).abs() < 1e-6, "{eps} vs {oracle}");
        assert!((eps - 0.04550).abs() < 1e-5);
        for s in [0.2, 0.7, 1.5] {
            let single = phase_slip_probability(s, DynamicRange::SINGLE_QUADRATURE).unwrap();
            let dual = phase_slip_probability(s, DynamicRange::DUAL_QUADRATURE).unwrap();
            assert!(single > dual);
        }
        assert!(phase_slip_probability(-1.0, DynamicRange::DUAL_QUADRATURE).is_err());
        assert!(DynamicRange::new(0.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(decay_envelope(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(decay_envelope(SQRT_2).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        let fit = PhaseFit::new(BETA, ALPHA, 0.0).unwrap();
        let t1 = (1.0 / BETA).powf(1.0 / ALPHA);
        assert_abs_diff_eq!(decay_envelope(fit.laser_sigma(t1)).unwrap(), 0.6065, epsilon = 1e-4);
    }

    #[test]
    fn gain_examples() {
        assert_abs_diff_eq!(metrological_gain_db(0.59).unwrap(), 2.55, epsilon = 0.005);
        assert_abs_diff_eq!(metrological_gain_db(1.0).unwrap(), 10.0 * 2f64.sqrt().log10(), epsilon = 1e-12);
        assert_abs_diff_eq!(metrological_gain_db(0.5).unwrap(), 10.0 * 2f64.log10(), epsilon = 1e-12);
        assert!(metrological_gain_db(0.0).is_err());
    }

    #[test]
    fn qpn_subtraction_examples() {
        let r = subtract_qpn(0.3, 0.3).unwrap();
        assert_eq!((r.sigma, r.clamped), (0.0, false));
        assert_abs_diff_eq!(subtract_qpn(5.0, 3.0).unwrap().sigma, 4.0, epsilon = 1e-15);
        let r = subtract_qpn(PI * 0.1, DEFAULT_SIGMA_QPN).unwrap();
        // sqrt(0.1² − 0.0915²) = 0.040344...
        assert_abs_diff_eq!(r.sigma / PI, (0.01f64 - 0.0915 * 0.0915).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.sigma / PI, 0.0404, epsilon = 1e-4);
        assert!(subtract_qpn(0.1, 0.2).unwrap().clamped);
    }

    #[test]
    fn t_max_ratio_and_round_trip() {
        let fit = PhaseFit::new(BETA, ALPHA, 0.0).unwrap();
        for eps in [1e-4, 0.01, 0.1, 0.5] {
            let dual = t_max(eps, &fit, DynamicRange::DUAL_QUADRATURE).unwrap();
            let single = t_max(eps, &fit, DynamicRange::SINGLE_QUADRATURE).unwrap();
            assert_abs_diff_eq!(dual / single, 2f64.powf(1.0 / ALPHA), epsilon = 1e-9);
            let back = phase_slip_probability(fit.laser_sigma(dual), DynamicRange::DUAL_QUADRATURE).unwrap();
            assert!((back - eps).abs() < 1e-8 * eps.max(1e-3));
        }
        assert!((2f64.powf(1.0 / ALPHA) - 3.24).abs() < 0.01);
        assert!(t_max(0.0, &fit, DynamicRange::DUAL_QUADRATURE).is_err());
        assert!(t_max(1.0, &fit, DynamicRange::DUAL_QUADRATURE).is_err());
    }

    #[test]
    fn t_max_matches_forward_root_finding() {
        // Bisection on the forward map t -> ε(t), independent of erfc⁻¹.
        let fit = PhaseFit::new(BETA, ALPHA, 0.0).unwrap();
        let range = DynamicRange::SINGLE_QUADRATURE;
        let eps_at = |t: f64| phase_slip_probability(fit.laser_sigma(t), range).unwrap();
        let (mut lo, mut hi) = (1e-9f64, 1e6f64);
        for _ in 0..300 {
            let mid = (lo * hi).sqrt();
            if eps_at(mid) < 0.1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let closed = t_max(0.1, &fit, range).unwrap();
        assert!((closed / lo - 1.0).abs() < 1e-9, "{closed} vs {lo}");
    }

    #[test]
    fn growth_fit_exact_recovery() {
        let pts: Vec<(f64, f64)> = (1..=20).map(|i| (i as f64 * 0.5, BETA * (i as f64 * 0.5).powf(ALPHA))).collect();
        let fit = fit_sigma_growth(&pts, 0.0).unwrap();
        assert!((fit.beta - BETA).abs() < 1e-9 && (fit.alpha - ALPHA).abs() < 1e-9, "{fit:?}");
        assert!(fit.alpha_identifiable);
    }

    #[test]
    fn growth_fit_with_noise_and_qpn() {
        let mut r = rng::stream(9, &[]);
        let pts: Vec<(f64, f64)> = (1..=30)
            .map(|i| {
                let t = i as f64 * 0.5;
                let s = (BETA * t.powf(ALPHA)).hypot(DEFAULT_SIGMA_QPN);
                let noise: f64 = StandardNormal.sample(&mut r);
                (t, s * (1.0 + 0.01 * noise))
            })
            .collect();
        let fit = fit_sigma_growth(&pts, DEFAULT_SIGMA_QPN).unwrap();
        assert!((fit.beta / BETA - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.alpha / ALPHA - 1.0).abs() < 0.05, "{fit:?}");
        assert!(fit.beta_stderr().is_some());
    }

    #[test]
    fn growth_fit_degenerate_cases() {
        let flat: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 0.2)).collect();
        let fit = fit_sigma_growth(&flat, 0.2).unwrap();
        assert_eq!(fit.beta, 0.0);
        assert!(!fit.alpha_identifiable);
        let same_t: Vec<(f64, f64)> = (1..=6).map(|i| (1.0, i as f64)).collect();
        assert!(matches!(fit_sigma_growth(&same_t, 0.0), Err(Error::Fit { .. })));
        assert!(fit_sigma_growth(&flat[..4], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn slip_probability_monotone(s in 0.05..3.0f64, ds in 0.01..1.0f64, b in 0.5..4.0f64, db in 0.01..1.0f64) {
            let r = DynamicRange::new(b).unwrap();
            let e = phase_slip_probability(s, r).unwrap();
            prop_assume!(e > 1e-300);
            prop_assert!(phase_slip_probability(s + ds, r).unwrap() > e);
            prop_assert!(phase_slip_probability(s, DynamicRange::new(b + db).unwrap()).unwrap() < e);
        }

        #[test]
        fn t_max_inverts_slip_probability(t in 0.01..100.0f64, beta in 0.05..2.0f64, alpha in 0.2..1.5f64) {
            let fit = PhaseFit::new(beta, alpha, 0.0).unwrap();
            let eps = phase_slip_probability(fit.laser_sigma(t), DynamicRange::DUAL_QUADRATURE).unwrap();
            prop_assume!(eps > 1e-280 && eps < 1.0);
            let back = t_max(eps, &fit, DynamicRange::DUAL_QUADRATURE).unwrap();
            prop_assert!((back / t - 1.0).abs() < 1e-8, "t={} back={}", t, back);
        }

        #[test]
        fn qpn_subtraction_inverts_quadrature_sum(a in 0.0..10.0f64, b in 0.0..10.0f64) {
            let r = subtract_qpn(a.hypot(b), b).unwrap();
            prop_assert!((r.sigma - a).abs() < 1e-6 * (1.0 + a.max(b)));
        }
    }
}
