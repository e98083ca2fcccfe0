//! Complementary error function and its inverse.

/// `erfc(x) = 1 - erf(x)`, accurate to a few ulp over the whole real line.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Inverse of [`erfc`] on `(0, 2)`.
///
/// Bracketed Newton iteration: every step is clamped to the current bracket
/// and falls back to bisection when it would leave it, so the result is
/// always within the bracket and converges to ~1 ulp in `erfc`.
/// Returns `None` outside the open interval `(0, 2)`.
pub fn erfc_inv(y: f64) -> Option<f64> {
    if !(y > 0.0 && y < 2.0) {
        return None;
    }
    if y == 1.0 {
        return Some(0.0);
    }
    // erfc(-x) = 2 - erfc(x): solve on the positive half-line.
    if y > 1.0 {
        return erfc_inv(2.0 - y).map(|x| -x);
    }

    // erfc is decreasing; erfc(0) = 1 >= y and erfc(27) underflows to ~0.
    let (mut lo, mut hi) = (0.0_f64, 27.5_f64);
    let mut x = initial_guess(y).clamp(lo, hi);
    for _ in 0..200 {
        let f = erfc(x) - y;
        if f == 0.0 {
            return Some(x);
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d/dx erfc(x) = -2/sqrt(pi) exp(-x^2)
        let deriv = -std::f64::consts::FRAC_2_SQRT_PI * (-x * x).exp();
        let mut next = if deriv != 0.0 { x - f / deriv } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * x.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}

fn initial_guess(y: f64) -> f64 {
    // Leading term of the asymptotic tail for small y, linear near y = 1.
    if y < 0.1 {
        let t = -(y * std::f64::consts::PI.sqrt()).ln();
        (t - 0.5 * t.max(1.0).ln()).max(0.0).sqrt()
    } else {
        (1.0 - y) * std::f64::consts::PI.sqrt() / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson integration of `2/sqrt(pi) exp(-t^2)` on `[x, x+12]`.
    fn erfc_by_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let (a, b) = (x, x + 12.0);
        let h = (b - a) / n as f64;
        let f = |t: f64| std::f64::consts::FRAC_2_SQRT_PI * (-t * t).exp();
        let mut sum = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(a + i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn erfc_matches_quadrature() {
        for &x in &[0.0, 0.3, 1.0, std::f64::consts::SQRT_2, 2.5, 4.0] {
            let q = erfc_by_quadrature(x);
            let rel = (erfc(x) - q).abs() / q;
            assert!(rel < 1e-10, "x={x} erfc={} quad={q} rel={rel}", erfc(x));
        }
    }

    #[test]
    fn erfc_inv_round_trips() {
        for &y in &[1e-300, 1e-12, 1e-6, 0.01, 0.0455, 0.1, 0.5, 0.999, 1.0, 1.3, 1.9999] {
            let x = erfc_inv(y).unwrap();
            let back = erfc(x);
            assert!(((back - y) / y).abs() < 1e-12, "y={y} x={x} back={back}");
        }
    }

    #[test]
    fn erfc_inv_rejects_out_of_range() {
        assert_eq!(erfc_inv(0.0), None);
        assert_eq!(erfc_inv(2.0), None);
        assert_eq!(erfc_inv(-0.5), None);
        assert_eq!(erfc_inv(f64::NAN), None);
    }
}
