//! Zero-mean Gaussian folded (image-summed) into `[−B, B]`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::fit::scan_then_refine;

use super::wrap_phase;

const MIN_SAMPLES: usize = 50;
const IMAGE_CUTOFF: f64 = 1e-12;
const MAX_IMAGES: i64 = 10_000;

/// Density of `N(0, σ²)` wrapped with period `2B`, evaluated on `[−B, B]`.
///
/// Images `x + 2kB` are added pairwise until the next pair contributes less
/// than `1e-12` of the central term.
pub fn folded_gaussian_density(x: f64, sigma: f64, half_range: f64) -> f64 {
    let norm = 1.0 / (sigma * (2.0 * PI).sqrt());
    let g = |u: f64| (-0.5 * (u / sigma).powi(2)).exp();
    let central = g(x);
    let mut sum = central;
    let period = 2.0 * half_range;
    for k in 1..=MAX_IMAGES {
        let kp = k as f64 * period;
        let pair = g(x + kp) + g(x - kp);
        sum += pair;
        // The pair terms decrease monotonically once |kp| > |x| + σ.
        if pair <= IMAGE_CUTOFF * central.max(f64::MIN_POSITIVE) && kp > x.abs() + sigma {
            break;
        }
    }
    sum * norm
}

fn check(deviations: &[f64], half_range: f64) -> Result<()> {
    if !(half_range.is_finite() && half_range > 0.0) {
        return Err(invalid(format!("fold range must be > 0, got {half_range}")));
    }
    if deviations.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData { needed: MIN_SAMPLES, got: deviations.len() });
    }
    if deviations.iter().any(|d| !d.is_finite()) {
        return Err(invalid("deviations must be finite"));
    }
    Ok(())
}

fn negative_log_likelihood(xs: &[f64], sigma: f64, half_range: f64) -> f64 {
    xs.iter()
        .map(|&x| -folded_gaussian_density(x, sigma, half_range).max(1e-300).ln())
        .sum()
}

fn fold(xs: &[f64], half_range: f64) -> Vec<f64> {
    xs.iter().map(|&x| wrap_phase(x * PI / half_range) * half_range / PI).collect()
}

/// Maximum-likelihood `σ` of a zero-mean Gaussian folded into `[−B, B]`.
///
/// Samples outside the range are first folded into it. The likelihood is
/// scanned on a log-σ grid from `1e-4·B` to `20·B` and refined by golden
/// section.
pub fn fit_folded_gaussian(deviations: &[f64], half_range: f64) -> Result<f64> {
    check(deviations, half_range)?;
    let xs = fold(deviations, half_range);
    let (lo, hi) = ((1e-4 * half_range).ln(), (20.0 * half_range).ln());
    let u = scan_then_refine(|u| negative_log_likelihood(&xs, u.exp(), half_range), lo, hi, 121, 1e-9);
    Ok(u.exp())
}

/// Histogram least-squares alternative to [`fit_folded_gaussian`], kept for
/// cross-checks: fits the folded density to a normalized histogram with
/// `bins` equal-width bins over `[−B, B]`.
pub fn fit_folded_gaussian_histogram(deviations: &[f64], half_range: f64, bins: usize) -> Result<f64> {
    check(deviations, half_range)?;
    if bins < 4 {
        return Err(invalid("need at least 4 histogram bins"));
    }
    let xs = fold(deviations, half_range);
    let width = 2.0 * half_range / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in &xs {
        let i = (((x + half_range) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    let n = xs.len() as f64;
    let density: Vec<(f64, f64)> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (-half_range + (i as f64 + 0.5) * width, c as f64 / (n * width)))
        .collect();
    let cost = |u: f64| {
        let s = u.exp();
        density
            .iter()
            .map(|&(x, h)| (folded_gaussian_density(x, s, half_range) - h).powi(2))
            .sum::<f64>()
    };
    let (lo, hi) = ((1e-3 * half_range).ln(), (20.0 * half_range).ln());
    Ok(scan_then_refine(cost, lo, hi, 121, 1e-9).exp())
}

/// Draws from the folded model, for synthetic-truth checks.
pub fn sample_folded_gaussian<R: Rng + ?Sized>(sigma: f64, half_range: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and >= 0");
    (0..n)
        .map(|_| {
            let x: f64 = normal.sample(rng);
            wrap_phase(x * PI / half_range) * half_range / PI
        })
        .collect()
}
