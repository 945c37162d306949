use std::f64::consts::PI;

use super::Point;
use crate::error::{Error, Result};

const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Number of real basis functions of degree <= `max_degree` on S^n.
pub fn basis_len(n: usize, max_degree: usize) -> usize {
    match n {
        1 => 2 * max_degree + 1,
        _ => (max_degree + 1) * (max_degree + 1),
    }
}

/// Index range of the degree-`ell` block in a coefficient vector.
pub fn band_range(n: usize, ell: usize) -> std::ops::Range<usize> {
    match (n, ell) {
        (1, 0) => 0..1,
        (1, _) => 2 * ell - 1..2 * ell + 1,
        _ => ell * ell..(ell + 1) * (ell + 1),
    }
}

/// Position of `Y_{ell, m}` in a coefficient vector. `m > 0` selects the
/// cosine member, `m < 0` the sine member, `m = 0` the zonal one. On S^1 the
/// only members of degree `ell >= 1` are `m = ell` and `m = -ell`.
pub fn basis_index(n: usize, ell: usize, m: i64) -> Result<usize> {
    let bad = || Error::InvalidInput(format!("no harmonic (l = {ell}, m = {m}) on S^{n}"));
    let am = m.unsigned_abs() as usize;
    match n {
        1 => match (ell, m) {
            (0, 0) => Ok(0),
            (0, _) => Err(bad()),
            _ if am != ell => Err(bad()),
            _ if m > 0 => Ok(2 * ell - 1),
            _ => Ok(2 * ell),
        },
        2 => {
            if am > ell {
                return Err(bad());
            }
            Ok(match m {
                0 => ell * ell,
                m if m > 0 => ell * ell + 2 * am - 1,
                _ => ell * ell + 2 * am,
            })
        }
        _ => Err(bad()),
    }
}

/// Fills `out[k] = P~_{m+k}^m(x)` for `k = 0..=max_degree-m`, where `P~` is
/// the associated Legendre function normalized to unit L^2 norm on [-1, 1]
/// and `sin_t = sqrt(1 - x^2)`.
pub(crate) fn legendre_column(max_degree: usize, m: usize, x: f64, sin_t: f64, out: &mut [f64]) {
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=m {
        let kf = k as f64;
        pmm *= ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sin_t;
    }
    out[0] = pmm;
    if m == max_degree {
        return;
    }
    let mf = m as f64;
    out[1] = (2.0 * mf + 3.0).sqrt() * x * pmm;
    for ell in m + 2..=max_degree {
        let l = ell as f64;
        let a = ((4.0 * l * l - 1.0) / (l * l - mf * mf)).sqrt();
        let lm1 = l - 1.0;
        let b = ((lm1 * lm1 - mf * mf) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
        let k = ell - m;
        out[k] = a * (x * out[k - 1] - b * out[k - 2]);
    }
}

/// All orthonormal real harmonics of degree <= `max_degree` at `p`, in
/// coefficient-vector order.
pub fn eval_basis(n: usize, max_degree: usize, p: &Point) -> Vec<f64> {
    let mut out = vec![0.0; basis_len(n, max_degree)];
    match n {
        1 => {
            let theta = p[1].atan2(p[0]);
            out[0] = INV_SQRT_2PI;
            for ell in 1..=max_degree {
                let (s, c) = (ell as f64 * theta).sin_cos();
                out[2 * ell - 1] = c * INV_SQRT_PI;
                out[2 * ell] = s * INV_SQRT_PI;
            }
        }
        _ => {
            let x = p[2].clamp(-1.0, 1.0);
            let sin_t = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let phi = p[1].atan2(p[0]);
            let mut col = vec![0.0; max_degree + 1];
            for m in 0..=max_degree {
                legendre_column(max_degree, m, x, sin_t, &mut col);
                let (s, c) = (m as f64 * phi).sin_cos();
                for ell in m..=max_degree {
                    let v = col[ell - m];
                    if m == 0 {
                        out[ell * ell] = v * INV_SQRT_2PI;
                    } else {
                        out[ell * ell + 2 * m - 1] = v * c * INV_SQRT_PI;
                        out[ell * ell + 2 * m] = v * s * INV_SQRT_PI;
                    }
                }
            }
        }
    }
    out
}

/// Orthonormal degree-`ell` harmonic that depends only on the north
/// coordinate on S^2 (`Y_{ell,0}`); on S^1 the cosine member `cos(ell t)/sqrt(pi)`.
pub fn zonal(n: usize, ell: usize, p: &Point) -> f64 {
    match n {
        1 if ell == 0 => INV_SQRT_2PI,
        1 => (ell as f64 * p[1].atan2(p[0])).cos() * INV_SQRT_PI,
        _ => {
            // sqrt((2l+1)/(4 pi)) P_l(x) via the three-term recurrence
            let x = p[2];
            let (mut p0, mut p1) = (1.0, x);
            if ell == 0 {
                p1 = 1.0;
            }
            for k in 2..=ell {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            ((2.0 * ell as f64 + 1.0) / (4.0 * PI)).sqrt() * p1
        }
    }
}
