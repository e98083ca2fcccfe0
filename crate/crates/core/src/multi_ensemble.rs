//! Cascaded phase estimation across ensembles with geometrically reduced
//! sensitivity.
//!
//! Ensemble `m` accumulates the fraction `2^{−m}` of the laser phase, so the
//! slowest of `M` ensembles stays inside `(−π, π]` for full phases up to
//! `2^{M−1}·π`. Starting from the slowest, each stage predicts the next
//! faster ensemble's phase as twice the current estimate and picks the `2π`
//! branch of its reading nearest to that prediction.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::estimation::{estimate_phase, wrap_phase, ShotRecord, ShotTable};
use crate::rng;

/// Phase reading of one ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleEstimate {
    pub m: usize,
    /// Effective phase fraction, `2^{−m}` for compiled schedules.
    pub fraction: f64,
    /// Reading on `(−π, π]`.
    pub theta_hat: f64,
    /// Atoms per quadrature (informational).
    pub n_atoms: u64,
}

impl EnsembleEstimate {
    pub fn new(m: usize, theta_hat: f64, n_atoms: u64) -> Self {
        Self { m, fraction: 0.5f64.powi(m as i32), theta_hat, n_atoms }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnwrapResult {
    /// Unwrapped phase of the fastest ensemble.
    pub theta_full: f64,
    /// Branch index `n` chosen at each stage (`θ̂ + 2πn`), slowest first.
    pub branch_choices: Vec<i64>,
    /// Set when some stage reading was more than `π/2` from its prediction.
    pub slip_flag: bool,
    /// `|chosen − predicted|` per stage; zero for the slowest.
    pub residuals: Vec<f64>,
}

/// An extra branch offset forced at one stage, for fault-injection tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchFault {
    pub stage: usize,
    pub offset: i64,
}

/// Nearest-branch cascaded unwrap. `estimates` must be sorted slow→fast with
/// fractions `2^{1−M}, …, 1/2, 1`.
pub fn cascaded_unwrap(estimates: &[EnsembleEstimate]) -> Result<UnwrapResult> {
    cascaded_unwrap_with_fault(estimates, None)
}

/// [`cascaded_unwrap`] with an optional forced branch error.
pub fn cascaded_unwrap_with_fault(estimates: &[EnsembleEstimate], fault: Option<BranchFault>) -> Result<UnwrapResult> {
    let m_count = estimates.len();
    if m_count == 0 {
        return Err(invalid("no ensemble estimates"));
    }
    for (i, e) in estimates.iter().enumerate() {
        let expected = 0.5f64.powi((m_count - 1 - i) as i32);
        if (e.fraction - expected).abs() > 1e-12 * expected {
            return Err(invalid(format!(
                "fractions must form the ladder 2^(1-M)..1 slow to fast; position {i} has {} (expected {expected})",
                e.fraction
            )));
        }
        if !(e.theta_hat > -PI && e.theta_hat <= PI) {
            return Err(invalid(format!("reading {} of ensemble {} outside (-π, π]", e.theta_hat, e.m)));
        }
    }
    if let Some(f) = fault {
        if f.stage >= m_count {
            return Err(invalid(format!("fault stage {} outside 0..{m_count}", f.stage)));
        }
    }
    let extra = |stage: usize| fault.filter(|f| f.stage == stage).map_or(0, |f| f.offset);

    let first = extra(0);
    let mut current = estimates[0].theta_hat + TAU * first as f64;
    let mut branch_choices = vec![first];
    let mut residuals = vec![0.0];
    let mut slip_flag = false;
    for (stage, e) in estimates.iter().enumerate().skip(1) {
        let prediction = 2.0 * current;
        let n0 = ((prediction - e.theta_hat) / TAU).round() as i64;
        let mut best = n0;
        let mut best_dist = f64::INFINITY;
        for n in [n0 - 1, n0, n0 + 1] {
            let value = e.theta_hat + TAU * n as f64;
            let dist = (value - prediction).abs();
            let best_value = e.theta_hat + TAU * best as f64;
            let closer = dist < best_dist - 1e-12;
            let tie = (dist - best_dist).abs() <= 1e-12 && value.abs() < best_value.abs();
            if closer || tie {
                best = n;
                best_dist = dist;
            }
        }
        let n = best + extra(stage);
        current = e.theta_hat + TAU * n as f64;
        let residual = (current - prediction).abs();
        slip_flag |= residual > FRAC_PI_2;
        branch_choices.push(n);
        residuals.push(residual);
    }
    Ok(UnwrapResult { theta_full: current, branch_choices, slip_flag, residuals })
}

/// Readings of one shot, `records[m]` for ensemble `m`, turned into
/// estimates sorted slow→fast.
pub fn estimates_for_shot(records: &[ShotRecord]) -> Result<Vec<EnsembleEstimate>> {
    records
        .iter()
        .enumerate()
        .rev()
        .map(|(m, r)| Ok(EnsembleEstimate::new(m, estimate_phase(r)?, r.n_x.min(r.n_y))))
        .collect()
}

/// One unwrapped shot of a shot table.
#[derive(Debug, Clone, PartialEq)]
pub struct UnwrappedShot {
    pub t: f64,
    pub shot: u64,
    pub result: UnwrapResult,
    /// Some ensemble had unequal quadrature atom numbers.
    pub imbalanced: bool,
}

/// Unwraps every `(t, shot)` of a table holding ensembles `0..M`.
pub fn unwrap_table(table: &ShotTable, n_ensembles: usize) -> Result<Vec<UnwrappedShot>> {
    if n_ensembles == 0 {
        return Err(invalid("need at least one ensemble"));
    }
    let per: Vec<Vec<ShotRecord>> = (0..n_ensembles).map(|m| table.records(m)).collect::<Result<_>>()?;
    let mut shots: Vec<(f64, u64)> = table.rows.iter().map(|r| (r.t, r.shot)).collect();
    shots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    shots.dedup();
    if per.iter().any(|p| p.len() != shots.len()) {
        return Err(invalid("every ensemble must be read in every shot"));
    }
    shots
        .iter()
        .enumerate()
        .map(|(i, &(t, shot))| {
            let records: Vec<ShotRecord> = per.iter().map(|p| p[i]).collect();
            let result = cascaded_unwrap(&estimates_for_shot(&records)?)?;
            Ok(UnwrappedShot { t, shot, result, imbalanced: records.iter().any(ShotRecord::is_imbalanced) })
        })
        .collect()
}

/// Monte Carlo failure fraction with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipEstimate {
    pub probability: f64,
    pub stderr: f64,
    pub failures: u64,
    pub trials: u64,
}

impl SlipEstimate {
    /// Wilson score interval at `z` standard deviations.
    pub fn wilson_interval(&self, z: f64) -> (f64, f64) {
        let n = self.trials as f64;
        let p = self.probability;
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        ((centre - half).max(0.0), (centre + half).min(1.0))
    }
}

/// Probability that cascaded estimation with `M` ensembles misses the full
/// phase by `π` or more.
///
/// Per trial the full phase is drawn from `N(0, σ_full)`; ensemble `m` reads
/// `wrap(2^{−m}·θ + σ_m·z_m)` with `per_stage_sigma[m]` (index `m`, fastest
/// first). The random numbers of trial `i` depend only on `(seed, i)` and are
/// drawn in the order θ, `z_0`, `z_1`, …, so runs with different `M` share
/// them.
pub fn slip_probability_multi(
    sigma_full: f64,
    n_ensembles: usize,
    per_stage_sigma: &[f64],
    n_trials: u64,
    seed: u64,
) -> Result<SlipEstimate> {
    if !(sigma_full >= 0.0 && sigma_full.is_finite()) {
        return Err(invalid(format!("sigma_full must be >= 0, got {sigma_full}")));
    }
    if n_ensembles == 0 || n_ensembles > 62 {
        return Err(invalid("ensemble count must lie in 1..=62"));
    }
    if per_stage_sigma.len() != n_ensembles {
        return Err(invalid(format!("{} stage sigmas for {n_ensembles} ensembles", per_stage_sigma.len())));
    }
    if per_stage_sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(invalid("stage sigmas must be >= 0"));
    }
    if n_trials == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let tag = rng::label("slip-trial");
    let mut failures = 0u64;
    let mut estimates = Vec::with_capacity(n_ensembles);
    for trial in 0..n_trials {
        let mut r = rng::stream(seed, &[tag, trial]);
        let theta = sigma_full * Distribution::<f64>::sample(&StandardNormal, &mut r);
        let z: Vec<f64> = (0..n_ensembles).map(|_| StandardNormal.sample(&mut r)).collect();
        estimates.clear();
        for m in (0..n_ensembles).rev() {
            let reading = wrap_phase(0.5f64.powi(m as i32) * theta + per_stage_sigma[m] * z[m]);
            estimates.push(EnsembleEstimate::new(m, reading, 0));
        }
        let u = cascaded_unwrap(&estimates)?;
        if (u.theta_full - theta).abs() >= PI {
            failures += 1;
        }
    }
    let n = n_trials as f64;
    let p = failures as f64 / n;
    Ok(SlipEstimate { probability: p, stderr: (p * (1.0 - p) / n).sqrt(), failures, trials: n_trials })
}

/// Stability gain `sqrt(2^{M−1}/M)` of `M` cascaded ensembles.
pub fn ideal_stability_gain(n_ensembles: usize) -> Result<f64> {
    if n_ensembles == 0 {
        return Err(invalid("ensemble count must be >= 1"));
    }
    Ok((2f64.powi(n_ensembles as i32 - 1) / n_ensembles as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{phase_slip_probability, DynamicRange};
    use proptest::prelude::*;

    fn noiseless(theta: f64, m_count: usize) -> Vec<EnsembleEstimate> {
        (0..m_count).rev().map(|m| EnsembleEstimate::new(m, wrap_phase(theta * 0.5f64.powi(m as i32)), 10)).collect()
    }

    #[test]
    fn zero_phase() {
        let u = cascaded_unwrap(&noiseless(0.0, 3)).unwrap();
        assert_eq!(u.theta_full, 0.0);
        assert_eq!(u.branch_choices, vec![0, 0, 0]);
        assert!(!u.slip_flag);
    }

    #[test]
    fn hand_propagated_two_stage_example() {
        let est = noiseless(1.5 * PI, 2);
        assert!((est[0].theta_hat - 0.75 * PI).abs() < 1e-15);
        assert!((est[1].theta_hat + 0.5 * PI).abs() < 1e-15);
        let u = cascaded_unwrap(&est).unwrap();
        assert!((u.theta_full - 1.5 * PI).abs() < 1e-12);
        assert_eq!(u.branch_choices, vec![0, 1]);
    }

    #[test]
    fn ladder_is_checked() {
        let mut est = noiseless(0.3, 3);
        est[1].fraction = 0.3;
        assert!(cascaded_unwrap(&est).is_err());
        let mut est = noiseless(0.3, 2);
        est[0].theta_hat = 4.0;
        assert!(cascaded_unwrap(&est).is_err());
        assert!(cascaded_unwrap(&[]).is_err());
    }

    #[test]
    fn ties_prefer_smaller_magnitude() {
        // Prediction 2·(π/2) = π sits halfway between −0 + 0 and 0 + 2π for a
        // fast reading of 0.
        let est = [EnsembleEstimate::new(1, FRAC_PI_2, 0), EnsembleEstimate::new(0, 0.0, 0)];
        let u = cascaded_unwrap(&est).unwrap();
        assert_eq!(u.theta_full, 0.0);
        assert!(u.slip_flag);
    }

    #[test]
    fn exhaustive_noiseless_scan() {
        for m_count in 2..=4usize {
            let half_range = PI * 2f64.powi(m_count as i32 - 1);
            let steps = (2.0 * half_range / 1e-3) as i64;
            for i in 1..=steps {
                let theta = -half_range + i as f64 * 1e-3;
                let u = cascaded_unwrap(&noiseless(theta, m_count)).unwrap();
                assert!((u.theta_full - theta).abs() < 1e-9, "M={m_count} θ={theta} got {}", u.theta_full);
                assert!(!u.slip_flag);
            }
        }
    }

    #[test]
    fn single_ensemble_matches_closed_form() {
        for sigma in [1.0, 1.5, 2.5] {
            let est = slip_probability_multi(sigma, 1, &[0.0], 100_000, 11).unwrap();
            let exact = phase_slip_probability(sigma, DynamicRange::DUAL_QUADRATURE).unwrap();
            let se = (exact * (1.0 - exact) / 1e5).sqrt();
            assert!((est.probability - exact).abs() < 3.0 * se, "σ={sigma}: {} vs {exact}", est.probability);
        }
    }

    #[test]
    fn more_ensembles_never_slip_more() {
        let mut last = 1.0;
        for m_count in 1..=3 {
            let p = slip_probability_multi(2.5, m_count, &vec![0.0; m_count], 20_000, 4).unwrap().probability;
            assert!(p <= last, "M={m_count}: {p} > {last}");
            last = p;
        }
        assert_eq!(slip_probability_multi(0.5, 3, &[0.0; 3], 10_000, 1).unwrap().failures, 0);
    }

    #[test]
    fn gain_values() {
        assert_eq!(ideal_stability_gain(1).unwrap(), 1.0);
        assert!((ideal_stability_gain(2).unwrap() - 1.0).abs() < 1e-15);
        assert!((ideal_stability_gain(5).unwrap() - (16.0f64 / 5.0).sqrt()).abs() < 1e-15);
        assert!(ideal_stability_gain(0).is_err());
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let e = SlipEstimate { probability: 0.1, stderr: 0.0, failures: 10, trials: 100 };
        let (lo, hi) = e.wilson_interval(1.96);
        assert!(lo < 0.1 && hi > 0.1 && lo > 0.0);
    }

    proptest! {
        #[test]
        fn injected_faults_displace_by_stage_weight(
            m_count in 2..5usize,
            u in -1.0..1.0f64,
            stage_seed in 0..100usize,
            offset in prop_oneof![Just(-1i64), Just(1i64), Just(2i64)],
        ) {
            let theta = u * PI * 2f64.powi(m_count as i32 - 1) * 0.999;
            let stage = stage_seed % m_count;
            let est = noiseless(theta, m_count);
            let clean = cascaded_unwrap(&est).unwrap();
            let faulty = cascaded_unwrap_with_fault(&est, Some(BranchFault { stage, offset })).unwrap();
            let unit = TAU * 2f64.powi((m_count - 1 - stage) as i32);
            let ratio = (faulty.theta_full - clean.theta_full) / unit;
            prop_assert!((ratio - offset as f64).abs() < 1e-9, "ratio {}", ratio);
        }
    }
}
