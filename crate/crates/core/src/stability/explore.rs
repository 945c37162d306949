use serde::{Deserialize, Serialize};

use crate::conformal::{pullback, ConformalMap};
use crate::decompose::{SolverOptions, Target};
use crate::error::{Error, Result};
use crate::field::{min_on_sphere, SphereField};
use crate::quadform::SpectralEngine;
use crate::specialfn::local_constant;
use crate::sphere::{self, band_range, basis_len, eval_basis, transform_for, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreStart {
    /// `scale * (w1 w2 + w2 w3 + w3 w1)`.
    Strict(f64),
    /// Random coefficients of the given size.
    Random(f64),
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExploreOptions {
    pub degree: usize,
    pub iterations: usize,
    pub seed: u64,
    pub margin: f64,
    pub fd_step: f64,
    pub start: ExploreStart,
    pub solver: SolverOptions,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self {
            degree: 6,
            iterations: 10,
            seed: 0,
            margin: 1e-3,
            fd_step: 1e-4,
            start: ExploreStart::Strict(-0.1),
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreStep {
    pub iteration: usize,
    pub quotient: f64,
    pub min_u: f64,
    pub distance: f64,
    pub deficit: f64,
    pub gradient_norm: f64,
    pub renormalized: bool,
    /// `||P_l rho||^2` for `l = 2..=L`.
    pub band_energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub options: ExploreOptions,
    pub steps: Vec<ExploreStep>,
    pub stalled: bool,
    pub local_constant: f64,
    pub below_local: bool,
}

struct Eval {
    quotient: f64,
    distance: f64,
    deficit: f64,
    min_u: f64,
    c: f64,
    zeta: Point,
}

struct Explorer<'a> {
    engine: &'a SpectralEngine,
    opts: ExploreOptions,
    offset: usize,
    len: usize,
    weights: Vec<f64>,
}

impl Explorer<'_> {
    fn field(&self, x: &[f64]) -> SphereField {
        let n = self.engine.n();
        let (degree, offset) = (self.opts.degree, self.offset);
        let x = x.to_vec();
        SphereField::new(n, "explorer", move |p| {
            let b = eval_basis(n, degree, p);
            1.0 + b[offset..].iter().zip(&x).map(|(y, c)| y * c).sum::<f64>()
        })
    }

    fn band_energies(&self, x: &[f64]) -> Vec<f64> {
        let n = self.engine.n();
        (2..=self.opts.degree)
            .map(|l| band_range(n, l).map(|k| x[k - self.offset].powi(2)).sum())
            .collect()
    }

    fn evaluate(&self, x: &[f64], warm: Option<(f64, Point)>) -> Result<Eval> {
        let u = self.field(x);
        let t = transform_for(self.engine.n(), self.engine.ladder()[0]);
        let min_u = min_on_sphere(&u, &t.grid, self.engine.exec).1;
        if min_u <= self.opts.margin {
            return Err(Error::InvalidInput(format!("minimum {min_u} below the positivity margin")));
        }
        let target = Target::new(self.engine, &u)?;
        let (c0, z0) = warm.unwrap_or_else(|| (target.g(&[0.0; 3]) / crate::specialfn::sphere_area(self.engine.n()), [0.0; 3]));
        let d = match target.solve_branch(c0, z0, "warm", &self.opts.solver) {
            Ok(d) => d,
            Err(_) => {
                let c = target.g(&[0.0; 3]) / crate::specialfn::sphere_area(self.engine.n());
                target.solve_branch(c, [0.0; 3], "origin", &self.opts.solver)?
            }
        };
        if !(d.rho_energy > 0.0) {
            return Err(Error::OnManifold { deficit: target.deficit.deficit, scale: target.scale() });
        }
        Ok(Eval {
            quotient: target.deficit.deficit / d.rho_energy,
            distance: d.rho_energy,
            deficit: target.deficit.deficit,
            min_u,
            c: d.c,
            zeta: d.zeta_point(),
        })
    }

    fn gradient(&self, x: &[f64], warm: (f64, Point)) -> Result<Vec<f64>> {
        let h = self.opts.fd_step;
        let parts = self.engine.exec.map_range(self.len, |k| -> Result<f64> {
            let mut xp = x.to_vec();
            xp[k] += h;
            let fp = self.evaluate(&xp, Some(warm))?.quotient;
            xp[k] -= 2.0 * h;
            let fm = self.evaluate(&xp, Some(warm))?.quotient;
            Ok((fp - fm) / (2.0 * h))
        });
        parts.into_iter().collect()
    }

    /// Pulls `u` back so its best bubble becomes the constant, divides by `c`
    /// and keeps degrees `2..=L`.
    fn renormalize(&self, x: &[f64], e: &Eval) -> Result<Vec<f64>> {
        let map = ConformalMap::flattening(self.engine.n(), &e.zeta);
        let w = pullback(&self.field(x), &map, &self.engine.params).scaled(1.0 / e.c);
        let (coeffs, _) = self.engine.converged_from(&w, self.opts.degree)?;
        let start = band_range(self.engine.n(), 2).start;
        Ok(coeffs.data[start..start + self.len].to_vec())
    }
}

/// Projected descent on `E(1 + rho)` over `rho` in degrees `2..=L`.
pub fn explore_min(engine: &SpectralEngine, opts: &ExploreOptions) -> Result<Trajectory> {
    let n = engine.n();
    if n != 2 || !engine.params.lower_window() {
        return Err(Error::InvalidInput("the explorer needs n = 2 and s - n/2 in (0, 1)".into()));
    }
    if !(2..=12).contains(&opts.degree) {
        return Err(Error::InvalidInput(format!("degree {} outside 2..=12", opts.degree)));
    }
    let offset = band_range(n, 2).start;
    let len = basis_len(n, opts.degree) - offset;
    let a2 = engine.alpha()[2];
    let weights = (2..=opts.degree)
        .flat_map(|l| std::iter::repeat(a2 / engine.alpha()[l]).take(band_range(n, l).len()))
        .collect();
    let ex = Explorer { engine, opts: *opts, offset, len, weights };
    let mut x = vec![0.0; ex.len];
    match opts.start {
        ExploreStart::Zero => {
            return Err(Error::OnManifold { deficit: 0.0, scale: 0.0 });
        }
        ExploreStart::Strict(scale) => {
            let rho = super::strict_direction();
            let (c, _) = engine.converged_from(&rho, opts.degree)?;
            for (k, v) in x.iter_mut().enumerate() {
                *v = scale * c.data.get(offset + k).copied().unwrap_or(0.0);
            }
        }
        ExploreStart::Random(scale) => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
            for v in x.iter_mut() {
                *v = scale * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
    }
    let mut cur = ex.evaluate(&x, None)?;
    let mut steps = vec![ExploreStep {
        iteration: 0,
        quotient: cur.quotient,
        min_u: cur.min_u,
        distance: cur.distance,
        deficit: cur.deficit,
        gradient_norm: f64::NAN,
        renormalized: false,
        band_energies: ex.band_energies(&x),
    }];
    let mut stalled = false;
    let mut eta = 0.02;
    for it in 1..=opts.iterations {
        let g = ex.gradient(&x, (cur.c, cur.zeta))?;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(gnorm > 1e-12) {
            stalled = true;
            break;
        }
        // descent direction in the a_2s metric, normalized to unit length
        let mut dir: Vec<f64> = g.iter().zip(&ex.weights).map(|(gi, w)| gi * w).collect();
        let dnorm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v /= dnorm);
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let mut accepted = None;
        let mut step = eta;
        for _ in 0..16 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi - step * di).collect();
            if let Ok(e) = ex.evaluate(&trial, Some((cur.c, cur.zeta))) {
                if e.quotient < cur.quotient - 1e-4 * step * slope {
                    accepted = Some((trial, e));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((mut nx, mut ne)) = accepted else {
            stalled = true;
            break;
        };
        eta = (2.0 * step).min(0.2);
        let mut renormalized = false;
        if sphere::norm(&ne.zeta) > 1e-9 || (ne.c - 1.0).abs() > 1e-9 {
            if let Ok(rx) = ex.renormalize(&nx, &ne) {
                if let Ok(re) = ex.evaluate(&rx, None) {
                    if re.quotient <= ne.quotient + 1e-8 * ne.quotient.abs() {
                        nx = rx;
                        ne = re;
                        renormalized = true;
                    }
                }
            }
        }
        x = nx;
        cur = ne;
        steps.push(ExploreStep {
            iteration: it,
            quotient: cur.quotient,
            min_u: cur.min_u,
            distance: cur.distance,
            deficit: cur.deficit,
            gradient_norm: gnorm,
            renormalized,
            band_energies: ex.band_energies(&x),
        });
    }
    let lc = local_constant(&engine.params);
    Ok(Trajectory {
        options: *opts,
        below_local: steps.iter().any(|s| s.quotient < lc),
        steps,
        stalled,
        local_constant: lc,
    })
}
