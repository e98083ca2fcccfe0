//! Small nonlinear least-squares toolkit: damped Gauss–Newton
//! (Levenberg–Marquardt), scalar minimization, and sinusoid fitting by
//! variable projection.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);

    /// Central-difference Jacobian unless overridden.
    fn jacobian(&self, params: &[f64], out: &mut DMatrix<f64>) {
        let m = self.n_residuals();
        let mut p = params.to_vec();
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for j in 0..params.len() {
            let h = 1e-6 * params[j].abs().max(1e-3);
            p[j] = params[j] + h;
            self.residuals(&p, &mut plus);
            p[j] = params[j] - h;
            self.residuals(&p, &mut minus);
            p[j] = params[j];
            for i in 0..m {
                out[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    pub params: Vec<f64>,
    /// `s²·(JᵀJ)⁻¹` with `s² = rss/(m − n)`; `None` when singular.
    pub covariance: Option<DMatrix<f64>>,
    pub rss: f64,
    pub iterations: usize,
}

pub struct LmOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 1e-15 }
    }
}

fn rss(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Levenberg–Marquardt with Marquardt diagonal scaling.
pub fn levenberg_marquardt<P: LeastSquaresProblem>(problem: &P, start: &[f64], opts: &LmOptions) -> Result<LeastSquaresFit> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    if m < n {
        return Err(Error::InsufficientData { needed: n, got: m });
    }
    let mut params = start.to_vec();
    let mut r = vec![0.0; m];
    problem.residuals(&params, &mut r);
    let mut cost = rss(&r);
    if !cost.is_finite() {
        return Err(Error::Fit { reason: "non-finite residual at start".into(), iterations: 0, residual: cost });
    }
    let mut jac = DMatrix::zeros(m, n);
    let mut lambda = 1e-3;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        problem.jacobian(&params, &mut jac);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        if g.amax() <= 1e-300 || cost == 0.0 {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            for k in 0..n {
                trial[k] = params[k] + step[k];
            }
            problem.residuals(&trial, &mut r_trial);
            let c = rss(&r_trial);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(1e-300);
                let step_small = step.iter().zip(&params).all(|(s, p)| s.abs() <= 1e-14 * p.abs().max(1e-10));
                params.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = c;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel < opts.tolerance || step_small {
                    return Ok(finish(problem, params, cost, iterations, &mut jac));
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved {
            // No downhill step at any damping: a (local) minimum.
            break;
        }
    }
    if iterations >= opts.max_iterations {
        return Err(Error::Fit { reason: "iteration limit reached".into(), iterations, residual: cost });
    }
    Ok(finish(problem, params, cost, iterations, &mut jac))
}

fn finish<P: LeastSquaresProblem>(problem: &P, params: Vec<f64>, cost: f64, iterations: usize, jac: &mut DMatrix<f64>) -> LeastSquaresFit {
    let (m, n) = (problem.n_residuals(), problem.n_params());
    problem.jacobian(&params, jac);
    let jtj = jac.transpose() * &*jac;
    let dof = (m - n).max(1) as f64;
    let covariance = jtj.try_inverse().map(|inv| inv * (cost / dof));
    LeastSquaresFit { params, covariance, rss: cost, iterations }
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (hi - lo).abs() > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Grid scan followed by golden-section refinement around the best node.
pub fn scan_then_refine<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, nodes: usize, tol: f64) -> f64 {
    let step = (hi - lo) / (nodes - 1) as f64;
    let best = (0..nodes)
        .map(|i| lo + i as f64 * step)
        .map(|x| (x, f(x)))
        .fold((lo, f64::INFINITY), |acc, (x, v)| if v < acc.1 { (x, v) } else { acc });
    golden_section(&f, (best.0 - step).max(lo), (best.0 + step).min(hi), tol)
}

/// `y ≈ amplitude·cos(2π·frequency·x + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub rss: f64,
}

impl SinusoidFit {
    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (TAU * self.frequency * x + self.phase).cos() + self.offset
    }
}

/// Linear least squares for `a·cos(ωx) + b·sin(ωx) + c` at fixed `ω`.
/// Returns `(a, b, c, rss)`.
fn linear_sinusoid(x: &[f64], y: &[f64], w: f64) -> (f64, f64, f64, f64) {
    let n = x.len();
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => (w * x[i]).cos(),
        1 => (w * x[i]).sin(),
        _ => 1.0,
    });
    let rhs = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let coef = match svd.solve(&rhs, 1e-12) {
        Ok(c) => c,
        Err(_) => DVector::zeros(3),
    };
    let resid = &design * &coef - &rhs;
    (coef[0], coef[1], coef[2], resid.norm_squared())
}

/// Fit a sinusoid with fixed frequency to `(x, y)`.
pub fn fit_sinusoid_at(x: &[f64], y: &[f64], frequency: f64) -> SinusoidFit {
    let (a, b, c, rss) = linear_sinusoid(x, y, TAU * frequency);
    // a cos + b sin = A cos(ωx + φ) with A = |(a, b)|, φ = atan2(−b, a)
    SinusoidFit { frequency, amplitude: a.hypot(b), phase: (-b).atan2(a), offset: c, rss }
}

/// Fit a sinusoid of unknown frequency in `[0, max_frequency]`.
///
/// Variable projection: amplitude, phase and offset are solved linearly for
/// each trial frequency, and the frequency minimizing the residual is found
/// by a periodogram scan with golden-section refinement.
pub fn fit_sinusoid(x: &[f64], y: &[f64], max_frequency: Option<f64>) -> Result<SinusoidFit> {
    if x.len() != y.len() {
        return Err(crate::error::invalid("x and y lengths differ"));
    }
    if x.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: x.len() });
    }
    let (xmin, xmax) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = xmax - xmin;
    if !(span > 0.0) {
        return Err(Error::Fit { reason: "all abscissae equal".into(), iterations: 0, residual: f64::NAN });
    }
    let f_max = max_frequency.unwrap_or(0.5 * (x.len() - 1) as f64 / span);
    let nodes = ((f_max * span * 8.0).ceil() as usize).max(16) + 1;
    let cost = |f: f64| linear_sinusoid(x, y, TAU * f).3;
    let f = scan_then_refine(cost, 0.0, f_max, nodes, 1e-13 * f_max.max(1e-300));
    Ok(fit_sinusoid_at(x, y, f))
}
