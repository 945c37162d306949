//! The stability quotient `E(u) = deficit(u) / d(u)` and the probes built on it.

mod asymptotics;
mod explore;

pub use asymptotics::*;
pub use explore::*;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::{pullback, ConformalMap};
use crate::decompose::{Decomposition, SolverOptions, Target};
use crate::error::{Error, Result};
use crate::field::{min_on_sphere, two_bubble, SphereField};
use crate::quadform::{Deficit, SpectralEngine};
use crate::specialfn::{alpha, band_quotient_limit, local_constant};
use crate::sphere::{transform_for, zonal};

/// Largest dilation used by the random conformal invariance check.
pub const INVARIANCE_DELTA_MAX: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    pub s: f64,
    pub label: String,
    pub deficit: Deficit,
    pub distance: f64,
    pub quotient: f64,
    pub argmin: Decomposition,
    pub critical_points: usize,
    pub attained_multiplicity: usize,
    pub complete: bool,
    pub min_u: f64,
    /// `|E(c u_Phi) - E(u)| / E(u)` for one random conformal map and scale.
    pub invariance_residual: Option<f64>,
}

/// `E(u)`, optionally with a conformal invariance check seeded by `invariance_seed`.
pub fn quotient(
    engine: &SpectralEngine,
    u: &SphereField,
    opts: &SolverOptions,
    invariance_seed: Option<u64>,
) -> Result<StabilityReport> {
    let target = Target::new(engine, u)?;
    let d = target.distance(opts)?;
    let t = transform_for(engine.n(), target.coeffs.degree);
    let min_u = min_on_sphere(u, &t.grid, engine.exec).1;
    let q = d.deficit.deficit / d.distance;
    let invariance_residual = match invariance_seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = ConformalMap::random(engine.n(), &mut rng, INVARIANCE_DELTA_MAX);
            let c = 0.5 + rand::Rng::random::<f64>(&mut rng);
            let moved = pullback(u, &map, &engine.params).scaled(c);
            let other = quotient(engine, &moved, opts, None)?;
            Some((other.quotient - q).abs() / q.abs())
        }
        None => None,
    };
    Ok(StabilityReport {
        n: engine.n(),
        s: engine.params.s,
        label: u.label().to_string(),
        deficit: d.deficit,
        distance: d.distance,
        quotient: q,
        argmin: d.argmin,
        critical_points: d.set.points.len(),
        attained_multiplicity: d.attainers.len(),
        complete: d.set.complete,
        min_u,
        invariance_residual,
    })
}

/// One row of a probe table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub epsilon: Option<f64>,
    pub ell: Option<usize>,
    pub beta: Option<f64>,
    pub quotient: f64,
    pub predicted: Option<f64>,
    pub deficit: f64,
    pub distance: f64,
    pub min_u: f64,
    pub tail_ratio: f64,
    pub converged: bool,
}

impl ProbeRow {
    fn from_report(r: &StabilityReport) -> Self {
        Self {
            epsilon: None,
            ell: None,
            beta: None,
            quotient: r.quotient,
            predicted: None,
            deficit: r.deficit.deficit,
            distance: r.distance,
            min_u: r.min_u,
            tail_ratio: r.deficit.diagnostics.tail_ratio,
            converged: r.deficit.diagnostics.converged,
        }
    }

    fn failed(min_u: f64) -> Self {
        Self {
            epsilon: None,
            ell: None,
            beta: None,
            quotient: f64::NAN,
            predicted: None,
            deficit: f64::NAN,
            distance: f64::NAN,
            min_u,
            tail_ratio: f64::NAN,
            converged: false,
        }
    }
}

/// `1 - alpha(1) int rho^2 / a_2s[rho]`, the limit of `E(1 + eps rho)` as `eps -> 0`.
pub fn predicted_local(engine: &SpectralEngine, rho: &SphereField) -> Result<f64> {
    let (c, _) = engine.converged(rho)?;
    let l2: f64 = c.band_norms().iter().sum();
    Ok(1.0 - alpha(&engine.params, 1) * l2 / engine.value(&c))
}

/// Rejects perturbations with a visible `E_0 + E_1` component.
fn check_high_band(engine: &SpectralEngine, rho: &SphereField) -> Result<()> {
    let (c, _) = engine.converged(rho)?;
    let norms = c.band_norms();
    let total: f64 = norms.iter().sum();
    let low = norms[0] + norms.get(1).copied().unwrap_or(0.0);
    if low > 1e-20 + 1e-12 * total {
        return Err(Error::InvalidInput(format!(
            "perturbation has mass {low:e} in degrees 0 and 1"
        )));
    }
    Ok(())
}

fn perturbed(rho: &SphereField, eps: f64) -> SphereField {
    SphereField::constant(rho.n(), 1.0).combine(1.0, rho, eps)
}

fn check_positive(engine: &SpectralEngine, u: &SphereField, eps: f64) -> Result<f64> {
    let t = transform_for(engine.n(), engine.ladder()[0]);
    let (point, value) = min_on_sphere(u, &t.grid, engine.exec);
    if value <= 0.0 {
        return Err(Error::InvalidInput(format!("1 + {eps} rho reaches {value:e} at {point:?}")));
    }
    Ok(value)
}

/// `E(1 + eps rho)` against its predicted limit, for each `eps`.
pub fn probe_local(engine: &SpectralEngine, rho: &SphereField, eps_list: &[f64], opts: &SolverOptions) -> Result<Vec<ProbeRow>> {
    check_high_band(engine, rho)?;
    let predicted = predicted_local(engine, rho)?;
    for &eps in eps_list {
        check_positive(engine, &perturbed(rho, eps), eps)?;
    }
    engine
        .exec
        .map(eps_list, |&eps| {
            let r = quotient(engine, &perturbed(rho, eps), opts, None)?;
            Ok(ProbeRow { epsilon: Some(eps), predicted: Some(predicted), ..ProbeRow::from_report(&r) })
        })
        .into_iter()
        .collect()
}

/// Ratios `|E - predicted|(eps_k) / |E - predicted|(eps_{k+1})` over consecutive rows.
/// Halving `eps` at a linear rate gives ratios near 2.
pub fn richardson_ratios(rows: &[ProbeRow]) -> Vec<f64> {
    let gap = |r: &ProbeRow| (r.quotient - r.predicted.unwrap_or(f64::NAN)).abs();
    rows.windows(2).map(|w| gap(&w[0]) / gap(&w[1])).collect()
}

/// `E(1 + eps Y_ell)` with `Y_ell` the zonal harmonic of degree `ell`.
pub fn probe_sharpness(engine: &SpectralEngine, ells: &[usize], eps: f64, opts: &SolverOptions) -> Result<Vec<ProbeRow>> {
    if engine.params.lower_window() {
        return Err(Error::InvalidInput("the sharpness probe needs s - n/2 in (1, 2)".into()));
    }
    if let Some(&ell) = ells.iter().find(|&&l| l < 2) {
        return Err(Error::InvalidInput(format!("degree {ell} is below 2")));
    }
    let n = engine.n();
    let fields: Vec<(usize, SphereField)> = ells
        .iter()
        .map(|&ell| (ell, perturbed(&SphereField::new(n, format!("Y_{ell}"), move |p| zonal(n, ell, p)), eps)))
        .collect();
    for (_, u) in &fields {
        check_positive(engine, u, eps)?;
    }
    engine
        .exec
        .map(&fields, |(ell, u)| {
            let r = quotient(engine, u, opts, None)?;
            Ok(ProbeRow {
                epsilon: Some(eps),
                ell: Some(*ell),
                predicted: Some(band_quotient_limit(&engine.params, *ell)),
                ..ProbeRow::from_report(&r)
            })
        })
        .into_iter()
        .collect()
}

/// `w1 w2 + w2 w3 + w3 w1` on S^2.
pub fn strict_direction() -> SphereField {
    SphereField::new(2, "w1 w2 + w2 w3 + w3 w1", |p| p[0] * p[1] + p[1] * p[2] + p[2] * p[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictReport {
    pub rows: Vec<ProbeRow>,
    pub int_rho2: f64,
    pub int_rho3: f64,
    pub a2s_rho: f64,
    pub slope_measured: f64,
    pub slope_predicted: f64,
    pub slope_relative_error: f64,
    pub min_quotient: f64,
    pub argmin_epsilon: f64,
    pub local_constant: f64,
}

/// Linear coefficient of `E(1 + eps rho)` from symmetric pairs of `eps`,
/// Richardson-extrapolated when two magnitudes are present.
pub fn fit_slope(rows: &[ProbeRow]) -> Result<f64> {
    let mut mags: Vec<f64> = rows.iter().filter_map(|r| r.epsilon).filter(|e| *e > 0.0).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let find = |e: f64| rows.iter().find(|r| r.epsilon.is_some_and(|x| (x - e).abs() < 1e-15)).map(|r| r.quotient);
    let diffs: Vec<(f64, f64)> = mags
        .iter()
        .filter_map(|&e| Some((e, (find(e)? - find(-e)?) / (2.0 * e))))
        .collect();
    match diffs.as_slice() {
        [] => Err(Error::InvalidInput("slope fit needs eps and -eps pairs".into())),
        [(_, d)] => Ok(*d),
        _ => {
            let (e1, d1) = diffs[diffs.len() - 2];
            let (e2, d2) = diffs[diffs.len() - 1];
            Ok((e1 * e1 * d2 - e2 * e2 * d1) / (e1 * e1 - e2 * e2))
        }
    }
}

/// Cubic expansion check along `w1 w2 + w2 w3 + w3 w1` on S^2.
pub fn probe_strict(engine: &SpectralEngine, eps_list: &[f64], opts: &SolverOptions) -> Result<StrictReport> {
    if engine.n() != 2 || !engine.params.lower_window() {
        return Err(Error::InvalidInput("the strict probe needs n = 2 and s - n/2 in (0, 1)".into()));
    }
    let rho = strict_direction();
    let rows = probe_local(engine, &rho, eps_list, opts)?;
    let (c, _) = engine.converged(&rho)?;
    let t = transform_for(2, c.degree);
    let samples = rho.samples(&t.grid, engine.exec);
    let int_rho2 = t.grid.integrate_samples(&samples.iter().map(|v| v * v).collect::<Vec<_>>())?;
    let int_rho3 = t.grid.integrate_samples(&samples.iter().map(|v| v * v * v).collect::<Vec<_>>())?;
    if !(int_rho3 > 0.0) {
        return Err(Error::Invariant(format!("int rho^3 = {int_rho3} is not positive")));
    }
    let a2s_rho = engine.value(&c);
    let p = engine.params.p;
    let slope_predicted = -engine.alpha()[0] * (p - 1.0) * (p - 2.0) / 3.0 * int_rho3 / a2s_rho;
    let slope_measured = fit_slope(&rows)?;
    let best = rows
        .iter()
        .min_by(|a, b| a.quotient.total_cmp(&b.quotient))
        .ok_or_else(|| Error::InvalidInput("empty eps list".into()))?;
    Ok(StrictReport {
        int_rho2,
        int_rho3,
        a2s_rho,
        slope_measured,
        slope_predicted,
        slope_relative_error: (slope_measured - slope_predicted).abs() / slope_predicted.abs(),
        min_quotient: best.quotient,
        argmin_epsilon: best.epsilon.unwrap_or(f64::NAN),
        local_constant: local_constant(&engine.params),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleRow {
    pub epsilon: Option<f64>,
    pub ell: Option<usize>,
    pub beta: Option<f64>,
    pub quotient: f64,
    pub predicted: Option<f64>,
    pub deficit: f64,
    pub distance: f64,
    pub min_u: f64,
    pub tail_ratio: f64,
    pub converged: bool,
    pub critical_points: usize,
    pub attained_multiplicity: usize,
    /// Largest relative spread of remainder energy within a symmetric pair.
    pub pair_spread: Option<f64>,
}

/// Critical sets and quotients of the two-bubble family.
pub fn bubble_study(engine: &SpectralEngine, betas: &[f64], opts: &SolverOptions) -> Result<Vec<BubbleRow>> {
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return Err(Error::InvalidInput(format!("beta = {b} outside (0, 1)")));
    }
    let n = engine.n();
    let rows = engine.exec.map(betas, |&beta| -> Result<BubbleRow> {
        let u = two_bubble(&engine.params, beta);
        let (min_u, report) = match Target::new(engine, &u) {
            Ok(t) => {
                let g = transform_for(n, t.coeffs.degree);
                (min_on_sphere(&u, &g.grid, engine.exec).1, t.distance(opts).map(|d| (t.deficit.clone(), d)))
            }
            Err(e) => (f64::NAN, Err(e)),
        };
        match report {
            Ok((deficit, d)) => {
                let mut spread: Option<f64> = None;
                for (i, a) in d.set.points.iter().enumerate() {
                    for b in &d.set.points[i + 1..] {
                        let mirrored = a.zeta.iter().zip(&b.zeta).all(|(x, y)| (x + y).abs() < 1e-6);
                        if mirrored && (a.c - b.c).abs() < 1e-6 && a.zeta.iter().any(|z| z.abs() > 1e-6) {
                            let r = (a.rho_energy - b.rho_energy).abs() / a.rho_energy.abs();
                            spread = Some(spread.map_or(r, |s: f64| s.max(r)));
                        }
                    }
                }
                Ok(BubbleRow {
                    epsilon: None,
                    ell: None,
                    beta: Some(beta),
                    quotient: deficit.deficit / d.distance,
                    predicted: None,
                    deficit: deficit.deficit,
                    distance: d.distance,
                    min_u,
                    tail_ratio: deficit.diagnostics.tail_ratio,
                    converged: deficit.diagnostics.converged && d.set.complete,
                    critical_points: d.set.points.len(),
                    attained_multiplicity: d.attainers.len(),
                    pair_spread: spread,
                })
            }
            Err(e) if e.is_numerical() => {
                let f = ProbeRow::failed(min_u);
                Ok(BubbleRow {
                    epsilon: None,
                    ell: None,
                    beta: Some(beta),
                    quotient: f.quotient,
                    predicted: None,
                    deficit: f.deficit,
                    distance: f.distance,
                    min_u,
                    tail_ratio: f.tail_ratio,
                    converged: false,
                    critical_points: 0,
                    attained_multiplicity: 0,
                    pair_spread: None,
                })
            }
            Err(e) => Err(e),
        }
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specialfn::SpectralParams;

    fn engine(n: usize, s: f64) -> SpectralEngine {
        SpectralEngine::new(SpectralParams::new(n, s).unwrap())
    }

    fn y20() -> SphereField {
        SphereField::new(2, "Y20", |p| zonal(2, 2, p))
    }

    #[test]
    fn single_band_prediction() {
        let e = engine(2, 1.5);
        assert!((predicted_local(&e, &y20()).unwrap() - 6.0 / 7.0).abs() < 1e-12);
        let e = engine(2, 2.5);
        assert!((predicted_local(&e, &y20()).unwrap() - 10.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn local_quotient_near_band_limit() {
        let e = engine(2, 2.5);
        let opts = SolverOptions { budget: 2, ..Default::default() };
        let r = quotient(&e, &perturbed(&y20(), 0.05), &opts, Some(3)).unwrap();
        assert!((r.quotient - 10.0 / 9.0).abs() < 0.02, "{}", r.quotient);
        assert!(r.invariance_residual.unwrap() < 1e-6);
        let single = 0.05f64.powi(2) * alpha(&e.params, 2);
        assert!((r.distance / single - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_low_band_perturbation() {
        let e = engine(2, 1.5);
        let rho = SphereField::new(2, "w3", |p| p[2]);
        assert!(matches!(probe_local(&e, &rho, &[0.01], &SolverOptions::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn slope_fit_recovers_a_cubic() {
        let f = |e: f64| 0.8 + 0.3 * e + 2.0 * e * e + 5.0 * e * e * e;
        let rows: Vec<ProbeRow> = [0.05, -0.05, 0.02, -0.02]
            .iter()
            .map(|&e| ProbeRow { epsilon: Some(e), quotient: f(e), ..ProbeRow::failed(1.0) })
            .collect();
        assert!((fit_slope(&rows).unwrap() - 0.3).abs() < 1e-12);
    }
}
