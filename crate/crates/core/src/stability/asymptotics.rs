use serde::{Deserialize, Serialize};

use crate::conformal::balance_normalized;
use crate::decompose::Target;
use crate::error::{Error, Result};
use crate::field::SphereField;
use crate::quad1d::tanh_sinh;
use crate::quadform::SpectralEngine;
use crate::specialfn::{
    alpha_asymptotic_deviation, balance_constant, concentration_constant, sphere_area, SpectralParams,
};
use crate::sphere::{self, transform_for, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaDeviation {
    pub k_max: usize,
    /// `max_k k |alpha(k) k^{-2s} - 1|`.
    pub max_scaled: f64,
    pub last_scaled: f64,
    /// `|s (n - 1)|`, the limit of the scaled deviation.
    pub limit: f64,
}

pub fn alpha_deviation(params: &SpectralParams, k_max: usize) -> Result<AlphaDeviation> {
    let dev = alpha_asymptotic_deviation(params, k_max)?;
    Ok(AlphaDeviation {
        k_max,
        max_scaled: dev.iter().map(|d| d.1).fold(0.0, f64::max),
        last_scaled: dev.last().map_or(f64::NAN, |d| d.1),
        limit: (params.s * (params.n as f64 - 1.0)).abs(),
    })
}

/// `2^a |S^{n-1}| int_0^{pi/2} sin^{n-1} cos^{2s-1} w(psi) dpsi` with `a = (n+2s)/2`:
/// radial integrals over `R^n` of powers of the stereographic bubble.
fn radial(params: &SpectralParams, weight: impl Fn(f64) -> f64) -> Result<f64> {
    let n = params.n as f64;
    let s = params.s;
    let a = (n + 2.0 * s) / 2.0;
    let integral = tanh_sinh(
        |psi, _, to_right| {
            let c = if to_right < 0.25 { to_right.sin() } else { psi.cos() };
            psi.sin().powf(n - 1.0) * c.powf(2.0 * s - 1.0) * weight(psi)
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        1e-14,
    )?;
    Ok(2f64.powf(a) * sphere_area(params.n - 1) * integral)
}

/// `c_conc` by radial quadrature.
pub fn concentration_constant_quadrature(params: &SpectralParams) -> Result<f64> {
    Ok(2f64.powf(params.n as f64 / (2.0 * params.p)) * radial(params, |_| 1.0)?)
}

/// `c_bal` by radial quadrature.
pub fn balance_constant_quadrature(params: &SpectralParams) -> Result<f64> {
    radial(params, |psi| (2.0 * psi).cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormCheck {
    pub closed_form: f64,
    pub quadrature: f64,
    pub relative_error: f64,
}

impl ClosedFormCheck {
    fn new(closed_form: f64, quadrature: f64) -> Self {
        Self { closed_form, quadrature, relative_error: (closed_form - quadrature).abs() / closed_form.abs() }
    }
}

pub fn check_concentration_constant(params: &SpectralParams) -> Result<ClosedFormCheck> {
    Ok(ClosedFormCheck::new(concentration_constant(params), concentration_constant_quadrature(params)?))
}

pub fn check_balance_constant(params: &SpectralParams) -> Result<ClosedFormCheck> {
    Ok(ClosedFormCheck::new(balance_constant(params), balance_constant_quadrature(params)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCheck {
    pub t: f64,
    pub ratio: f64,
    pub constant: f64,
    pub relative_error: f64,
}

/// `int u v_{t nu}^{p-1} / (u(nu) (1 - t)^{n/(2p)})` against `c_conc`.
pub fn concentration_ratio(engine: &SpectralEngine, u: &SphereField, nu: &Point, t: f64) -> Result<ConcentrationCheck> {
    let r = sphere::norm(nu);
    if (r - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("direction has norm {r}")));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput(format!("t = {t} outside (0, 1)")));
    }
    let target = Target::new(engine, u)?;
    let g = target.g(&[t * nu[0], t * nu[1], t * nu[2]]);
    let n = engine.n() as f64;
    let ratio = g / (u.eval(nu) * (1.0 - t).powf(n / (2.0 * engine.params.p)));
    let constant = concentration_constant(&engine.params);
    Ok(ConcentrationCheck { t, ratio, constant, relative_error: (ratio - constant).abs() / constant.abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSweep {
    pub xi: Point,
    pub deltas: Vec<f64>,
    /// `|G(delta, xi) - xi|` for each delta.
    pub errors: Vec<f64>,
    pub monotone: bool,
}

/// Large-dilation behavior of the normalized balance map along each `xi`.
pub fn balance_sweep(engine: &SpectralEngine, u: &SphereField, xis: &[Point], deltas: &[f64]) -> Result<Vec<BalanceSweep>> {
    let grid = &transform_for(engine.n(), engine.max_degree()).grid;
    xis.iter()
        .map(|xi| {
            let errors = deltas
                .iter()
                .map(|&d| {
                    let g = balance_normalized(u, d, xi, &engine.params, grid, engine.exec)?;
                    Ok(((g[0] - xi[0]).powi(2) + (g[1] - xi[1]).powi(2) + (g[2] - xi[2]).powi(2)).sqrt())
                })
                .collect::<Result<Vec<f64>>>()?;
            let monotone = errors.windows(2).all(|w| w[1] < w[0]);
            Ok(BalanceSweep { xi: *xi, deltas: deltas.to_vec(), errors, monotone })
        })
        .collect()
}
