//! Double-exponential (tanh-sinh) quadrature on a finite interval. Tolerates
//! integrable endpoint singularities, which the radial integrals in the
//! asymptotic checks have.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Integrand signature: `f(x, dist_left, dist_right)`. The distances to the
/// endpoints are computed without cancellation so that singular factors can
/// use them directly.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64, f64, f64) -> f64,
{
    if !(b > a) {
        return Err(Error::InvalidInput(format!("empty interval [{a}, {b}]")));
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let t_max = 4.0;
    let term = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * s.abs()).exp();
        // distance from the nearer endpoint, and the weight
        let d = half * 2.0 * e / (1.0 + e);
        let w = half * FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if d <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let (x, dl, dr) = if t < 0.0 { (a + d, d, b - a - d) } else { (b - d, b - a - d, d) };
        let v = f(x, dl, dr);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let mut h = 0.5;
    let mut sum = f(mid, half, half) * half * FRAC_PI_2;
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += term(t) + term(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            sum += term(t) + term(-t);
            k += 2;
        }
        let next = sum * h;
        if (next - estimate).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::NoConvergence(format!("tanh-sinh quadrature stalled at {estimate}")))
}
