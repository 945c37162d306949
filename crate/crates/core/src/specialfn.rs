//! Exact-formula layer: Gamma, the spectral eigenvalues of the conformally
//! covariant operator, the sharp reverse Sobolev constant and the closed-form
//! constants that appear in the local expansion and the asymptotic lemmas.
//!
//! Everything here is a pure function of `(n, s)`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum distance of `s - n/2` from the excluded values {0, 1, 2}.
pub const SIGMA_MARGIN: f64 = 1e-9;

// Lanczos approximation, g = 10.900511, 11 terms.
const LANCZOS_G: f64 = 10.900511;
const LANCZOS_DK: [f64; 11] = [
    2.485_740_891_387_535_5e-5,
    1.051_423_785_817_219_7,
    -3.456_870_972_220_162_5,
    4.512_277_094_668_948,
    -2.982_852_253_235_766_4,
    1.056_397_115_771_267,
    -1.954_287_731_916_458_7e-1,
    1.709_705_434_044_412e-2,
    -5.719_261_174_043_057e-4,
    4.633_994_733_599_057e-6,
    -2.719_949_084_886_077_2e-9,
];
// 2 * sqrt(e / pi)
const TWO_SQRT_E_OVER_PI: f64 = 1.860_382_734_205_265_7;
const LN_TWO_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Admissible parameter pair: dimension `n` and order `s` with
/// `s - n/2` in (0,1) or (1,2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub n: usize,
    pub s: f64,
    /// Critical exponent `2n/(n-2s)`, negative in the admissible range.
    pub p: f64,
    /// `s - n/2`.
    pub sigma: f64,
}

impl SpectralParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("dimension n must be at least 1".into()));
        }
        if !s.is_finite() {
            return Err(Error::InvalidParams(format!("order s = {s} is not finite")));
        }
        let sigma = s - n as f64 / 2.0;
        let in_window = |lo: f64, hi: f64| sigma > lo + SIGMA_MARGIN && sigma < hi - SIGMA_MARGIN;
        if !(in_window(0.0, 1.0) || in_window(1.0, 2.0)) {
            return Err(Error::InvalidParams(format!(
                "s - n/2 = {sigma} must lie in (0,1) or (1,2) (n = {n}, s = {s})"
            )));
        }
        let p = 2.0 * n as f64 / (n as f64 - 2.0 * s);
        Ok(Self { n, s, p, sigma })
    }

    pub fn half_n(&self) -> f64 {
        self.n as f64 / 2.0
    }

    /// True in the window `s - n/2 in (0,1)`, where the sharp constant is negative.
    pub fn lower_window(&self) -> bool {
        self.sigma < 1.0
    }
}

/// `sin(pi x)` with argument reduction so that zeros are exact.
fn sin_pi(x: f64) -> f64 {
    let mut r = x % 2.0;
    if r > 1.0 {
        r -= 2.0;
    } else if r < -1.0 {
        r += 2.0;
    }
    if r > 0.5 {
        r = 1.0 - r;
    } else if r < -0.5 {
        r = -1.0 - r;
    }
    (PI * r).sin()
}

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

fn lanczos_sum(x: f64) -> f64 {
    LANCZOS_DK
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS_DK[0], |acc, (i, d)| acc + d / (x + i as f64 - 1.0))
}

/// Gamma function for real arguments, with reflection for `x < 1/2`.
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() || is_pole(x) {
        return Err(Error::GammaPole(x));
    }
    if x < 0.5 {
        let g = gamma(1.0 - x)?;
        return Ok(PI / (sin_pi(x) * g));
    }
    if x > 171.7 {
        return Ok(f64::INFINITY);
    }
    // Lanczos on [1, 2), then the recurrence upward. The power in the Lanczos
    // formula loses digits in proportion to x, the product does not.
    if x < 1.0 {
        return Ok(lanczos_gamma(x + 1.0) / x);
    }
    let shift = (x - 1.0).floor();
    let mut y = x - shift;
    let mut g = lanczos_gamma(y);
    for _ in 0..shift as usize {
        g *= y;
        y += 1.0;
    }
    Ok(g)
}

fn lanczos_gamma(x: f64) -> f64 {
    let t = (x - 0.5 + LANCZOS_G) / E;
    lanczos_sum(x) * TWO_SQRT_E_OVER_PI * t.powf(x - 0.5)
}

/// Sign of `Gamma(x)`; `x` must not be a pole.
pub fn gamma_sign(x: f64) -> f64 {
    if x > 0.0 || (x.floor() as i64).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `ln |Gamma(x)|`. Stirling series above 20, Lanczos below, reflection for `x < 1/2`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || is_pole(x) {
        return Err(Error::GammaPole(x));
    }
    if x < 0.5 {
        return Ok((PI / sin_pi(x).abs()).ln() - ln_gamma(1.0 - x)?);
    }
    if x >= 20.0 {
        return Ok(stirling_ln_gamma(x));
    }
    Ok(lanczos_sum(x).ln() + LN_TWO_SQRT_E_OVER_PI + (x - 0.5) * ((x - 0.5 + LANCZOS_G) / E).ln())
}

fn stirling_ln_gamma(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k} / (2k (2k-1) x^{2k-1})
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2 * (1.0 / 1260.0 + inv2 * (-1.0 / 1680.0 + inv2 * (1.0 / 1188.0)))));
    (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + series
}

/// Eigenvalue of `A_{2s}` on spherical harmonics of degree `ell`:
/// `Gamma(ell + n/2 + s) / Gamma(ell + n/2 - s)`, and exactly 0 when the
/// denominator argument is a non-positive integer.
pub fn alpha(params: &SpectralParams, ell: usize) -> f64 {
    let a = ell as f64 + params.half_n() + params.s;
    let b = ell as f64 + params.half_n() - params.s;
    if is_pole(b) {
        return 0.0;
    }
    if a <= 30.0 && b.abs() <= 30.0 {
        // Both arguments are safely inside the range where gamma() is accurate.
        return gamma(a).expect("a > 0") / gamma(b).expect("b is not a pole");
    }
    alpha_log(params, ell)
}

/// Same eigenvalue computed entirely in log space (no overflow for large `ell`).
pub fn alpha_log(params: &SpectralParams, ell: usize) -> f64 {
    let a = ell as f64 + params.half_n() + params.s;
    let b = ell as f64 + params.half_n() - params.s;
    if is_pole(b) {
        return 0.0;
    }
    let la = ln_gamma(a).expect("a > 0");
    let lb = ln_gamma(b).expect("b is not a pole");
    gamma_sign(b) * (la - lb).exp()
}

/// `alpha(0..=max_degree)` as a vector.
pub fn alpha_table(params: &SpectralParams, max_degree: usize) -> Vec<f64> {
    (0..=max_degree).map(|l| alpha(params, l)).collect()
}

/// Surface area of the unit sphere `S^n` in `R^{n+1}`.
pub fn sphere_area(n: usize) -> f64 {
    let h = (n as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / gamma(h).expect("positive argument")
}

/// Sharp constant of the (reverse) Sobolev inequality, by its closed form.
pub fn sobolev_constant(params: &SpectralParams) -> f64 {
    let n = params.n as f64;
    let s = params.s;
    let g = |x: f64| gamma(x).expect("admissible parameters avoid poles");
    (4.0 * PI).powf(s) * g((n + 2.0 * s) / 2.0) / g((n - 2.0 * s) / 2.0)
        * (g(n / 2.0) / g(n)).powf(2.0 * s / n)
}

/// Independent route to the sharp constant: `alpha(0) |S^n|^{2s/n}`, from
/// evaluating both sides of the inequality on the constant function.
pub fn sobolev_constant_from_area(params: &SpectralParams) -> f64 {
    alpha(params, 0) * sphere_area(params.n).powf(2.0 * params.s / params.n as f64)
}

/// Sharp constant expressed for the normalized measure `d omega / |S^n|`.
/// Equals `alpha(0)`.
pub fn sobolev_constant_normalized(params: &SpectralParams) -> f64 {
    sobolev_constant(params) * sphere_area(params.n).powf(2.0 / params.p - 1.0)
}

/// Limit of the stability quotient along perturbations of the constant in
/// degree-2 harmonics: `4s / (n + 2s + 2)`.
pub fn local_constant(params: &SpectralParams) -> f64 {
    4.0 * params.s / (params.n as f64 + 2.0 * params.s + 2.0)
}

/// `1 - alpha(1)/alpha(ell)`: the limiting quotient for perturbations in degree `ell`.
pub fn band_quotient_limit(params: &SpectralParams, ell: usize) -> f64 {
    1.0 - alpha(params, 1) / alpha(params, ell)
}

/// `(k, |alpha(k) k^{-2s} - 1| * k)` for `k = 10..=k_max`, in log space.
pub fn alpha_asymptotic_deviation(params: &SpectralParams, k_max: usize) -> Result<Vec<(usize, f64)>> {
    if k_max < 10 {
        return Err(Error::InvalidInput(format!("k_max = {k_max} must be at least 10")));
    }
    Ok((10..=k_max)
        .map(|k| {
            let kf = k as f64;
            let a = kf + params.half_n() + params.s;
            let b = kf + params.half_n() - params.s;
            let ln_ratio = ln_gamma(a).expect("a > 0") - ln_gamma(b).expect("b > 0") - 2.0 * params.s * kf.ln();
            (k, ln_ratio.exp_m1().abs() * kf)
        })
        .collect())
}

/// Closed form of `int_{R^n} (1-|x|^2)/(1+|x|^2) (2/(1+|x|^2))^{(n+2s)/2} dx`,
/// the leading coefficient of the balance map at large dilation.
pub fn balance_constant(params: &SpectralParams) -> f64 {
    let n = params.n as f64;
    let s = params.s;
    let g = |x: f64| gamma(x).expect("positive argument");
    2f64.powf((n + 2.0 * s - 2.0) / 2.0) * sphere_area(params.n - 1) * g(n / 2.0) * g(s)
        / g((n + 2.0 * s + 2.0) / 2.0)
        * params.sigma
}

/// Closed form of `int_{R^n} B^{p-1} dx` with `B = (2/(1+|x|^2))^{n/p}`.
pub fn bubble_power_integral(params: &SpectralParams) -> f64 {
    let n = params.n as f64;
    let a = (n + 2.0 * params.s) / 2.0;
    let g = |x: f64| gamma(x).expect("positive argument");
    2f64.powf(a) * PI.powf(n / 2.0) * g(params.s) / g(a)
}

/// Limit of `int u v_zeta^{p-1} / (u(nu) (1-|zeta|)^{n/(2p)})` as `zeta -> nu`.
pub fn concentration_constant(params: &SpectralParams) -> f64 {
    2f64.powf(params.n as f64 / (2.0 * params.p)) * bubble_power_integral(params)
}

/// All scalar constants for one parameter pair, raw and per-|S^n|.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constants {
    pub n: usize,
    pub s: f64,
    pub sigma: f64,
    pub p: f64,
    pub sphere_area: f64,
    pub alpha: Vec<f64>,
    pub sobolev_constant: f64,
    pub sobolev_constant_from_area: f64,
    pub sobolev_constant_normalized: f64,
    pub a2s_of_one: f64,
    pub a2s_of_one_normalized: f64,
    pub local_constant: f64,
    pub local_constant_from_alpha: f64,
    pub balance_constant: f64,
    pub concentration_constant: f64,
}

impl Constants {
    pub fn compute(params: &SpectralParams, max_degree: usize) -> Self {
        let area = sphere_area(params.n);
        let alpha = alpha_table(params, max_degree.max(2));
        Self {
            n: params.n,
            s: params.s,
            sigma: params.sigma,
            p: params.p,
            sphere_area: area,
            sobolev_constant: sobolev_constant(params),
            sobolev_constant_from_area: sobolev_constant_from_area(params),
            sobolev_constant_normalized: sobolev_constant_normalized(params),
            a2s_of_one: alpha[0] * area,
            a2s_of_one_normalized: alpha[0],
            local_constant: local_constant(params),
            local_constant_from_alpha: 1.0 - alpha[1] / alpha[2],
            balance_constant: balance_constant(params),
            concentration_constant: concentration_constant(params),
            alpha,
        }
    }
}
