//! Orthogonal decomposition `u = c v_zeta + rho` with `rho` a_2s-orthogonal to
//! the tangent space of the bubble manifold, critical-point enumeration and the
//! modified distance `d(u) = min a_2s[rho]`.
//!
//! Newton iterations run on the equivalent system `F_0 = alpha(0) (G - c |S^n|)`,
//! `F_i = alpha(0) dG/dzeta_i` with `G(zeta) = int u v_zeta^{p-1}`, which only
//! needs quadrature. Every converged point is then checked spectrally against
//! the defining orthogonality conditions.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::{random_unit, Bubble, ZETA_CLAMP};
use crate::error::{Error, Result};
use crate::field::SphereField;
use crate::par::Exec;
use crate::quadform::{Deficit, SpectralEngine};
use crate::specialfn::sphere_area;
use crate::sphere::{self, transform_for, Coeffs, Point};

/// Radii of the deterministic starts along each mesh direction.
pub const MESH_RADII: [f64; 3] = [0.3, 0.6, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Random restarts in addition to the deterministic starts.
    pub budget: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub fd_step: f64,
    /// Residual tolerance relative to `scale(u)`.
    pub tol: f64,
    pub dedup_radius: f64,
    pub zeta_clamp: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { budget: 16, seed: 0, max_iter: 80, fd_step: 1e-6, tol: 1e-10, dedup_radius: 1e-6, zeta_clamp: ZETA_CLAMP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub c: f64,
    pub zeta: Vec<f64>,
    /// `max |F_i|` of the Newton system at the solution.
    pub residual_norm: f64,
    /// `max |a_2s[rho, phi]|` over the tangent frame, computed spectrally.
    pub orthogonality: f64,
    pub rho_energy: f64,
    /// `a_2s[u] - alpha(0) c^2 |S^n|`, which must agree with `rho_energy`.
    pub rho_energy_identity: f64,
    pub degree: usize,
    pub iterations: usize,
    pub branch: String,
}

impl Decomposition {
    pub fn zeta_point(&self) -> Point {
        let mut z = [0.0; 3];
        z[..self.zeta.len()].copy_from_slice(&self.zeta);
        z
    }

    pub fn bubble(&self) -> Bubble {
        Bubble { n: self.zeta.len() - 1, c: self.c, zeta: self.zeta_point() }
    }

    /// `rho = u - c v_zeta`.
    pub fn remainder(&self, u: &SphereField, engine: &SpectralEngine) -> SphereField {
        u.combine(1.0, &self.bubble().field(&engine.params), -1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointSet {
    pub points: Vec<Decomposition>,
    /// True when every start converged to a listed point.
    pub complete: bool,
    pub starts: usize,
    pub failed_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub distance: f64,
    pub argmin: Decomposition,
    /// Indices into `set.points` attaining the minimum within tolerance.
    pub attainers: Vec<usize>,
    pub set: CriticalPointSet,
    pub low_confidence: bool,
    pub deficit: Deficit,
}

/// A field prepared for repeated decomposition solves.
pub struct Target<'a> {
    pub engine: &'a SpectralEngine,
    pub u: SphereField,
    pub coeffs: Coeffs,
    pub deficit: Deficit,
    area: f64,
    alpha0: f64,
}

/// Homotopy partner: residuals of `(1 - lambda) h0 + lambda u`.
#[derive(Clone, Copy)]
struct Blend {
    lambda: f64,
    h0: Bubble,
}

impl<'a> Target<'a> {
    pub fn new(engine: &'a SpectralEngine, u: &SphereField) -> Result<Self> {
        if u.n() != engine.n() {
            return Err(Error::InvalidInput(format!("field on S^{} but engine on S^{}", u.n(), engine.n())));
        }
        let (coeffs, diag) = engine.converged(u)?;
        let deficit = engine.deficit_with(u, &coeffs, diag)?;
        Ok(Self {
            engine,
            u: u.clone(),
            coeffs,
            deficit,
            area: sphere_area(engine.n()),
            alpha0: engine.alpha()[0],
        })
    }

    pub fn scale(&self) -> f64 {
        self.deficit.scale
    }

    pub fn a2s(&self) -> f64 {
        self.deficit.a2s
    }

    fn n(&self) -> usize {
        self.engine.n()
    }

    /// Quadrature degree that resolves `v_zeta^{p-1}` to roughly 1e-16.
    fn grid_degree(&self, zeta: &Point) -> usize {
        let r = sphere::norm(zeta).min(0.999_999);
        let base = self.coeffs.degree;
        let needed = if r < 1e-3 {
            0
        } else {
            let rho = r / (1.0 + (1.0 - r * r).sqrt());
            (18.5 / -rho.ln()).ceil() as usize
        };
        let want = base.max(needed);
        self.engine.ladder().iter().copied().find(|&l| l >= want).unwrap_or(self.engine.max_degree())
    }

    /// `G(zeta)` and its gradient.
    fn g_and_grad(&self, zeta: &Point, blend: Option<Blend>) -> (f64, Point) {
        let n = self.n();
        let p = self.engine.params.p;
        let sigma = self.engine.params.sigma;
        let t = transform_for(n, self.grid_degree(zeta));
        let grid = &t.grid;
        let us = self.u.samples(grid, Exec::Sequential);
        let q = 1.0 - sphere::dot(zeta, zeta);
        let e = n as f64 + sigma;
        let qf = q.powf(0.5 * e);
        let mut g = 0.0;
        let mut m = [0.0; 3];
        for (k, w) in grid.nodes.iter().enumerate() {
            let l = 1.0 - sphere::dot(zeta, w);
            let mut uv = us[k];
            if let Some(b) = blend {
                uv = b.lambda * uv + (1.0 - b.lambda) * b.h0.value(sigma, w);
            }
            let base = grid.weights[k] * uv * qf * l.powf(-e);
            g += base;
            for i in 0..=n {
                m[i] += base * w[i] / l;
            }
        }
        let mut grad = [0.0; 3];
        for i in 0..=n {
            grad[i] = (p - 1.0) * sigma * (zeta[i] / q * g - m[i]);
        }
        (g, grad)
    }

    fn residual_raw(&self, c: f64, zeta: &Point, blend: Option<Blend>) -> Vec<f64> {
        let (g, grad) = self.g_and_grad(zeta, blend);
        let mut r = Vec::with_capacity(self.n() + 2);
        r.push(self.alpha0 * (g - c * self.area));
        for gi in grad.iter().take(self.n() + 1) {
            r.push(self.alpha0 * gi);
        }
        r
    }

    /// Residual of the quadrature form of the system at `(c, zeta)`.
    pub fn residual_g(&self, c: f64, zeta: &Point) -> Vec<f64> {
        self.residual_raw(c, zeta, None)
    }

    /// `G(zeta) = int u v_zeta^{p-1}`.
    pub fn g(&self, zeta: &Point) -> f64 {
        self.g_and_grad(zeta, None).0
    }

    /// Damped Newton with a finite-difference Jacobian and SVD solves.
    fn newton(&self, c0: f64, z0: Point, blend: Option<Blend>, opts: &SolverOptions) -> Result<(f64, Point, usize, f64)> {
        let n = self.n();
        let dim = n + 2;
        let target = 0.1 * opts.tol * self.scale();
        let mut c = c0;
        let mut z = clamp_zeta(z0, opts.zeta_clamp);
        let mut r = self.residual_raw(c, &z, blend);
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let maxabs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for it in 0..opts.max_iter {
            if maxabs(&r) < target {
                return Ok((c, z, it, maxabs(&r)));
            }
            let mut jac = DMatrix::<f64>::zeros(dim, dim);
            jac[(0, 0)] = -self.alpha0 * self.area;
            for j in 0..=n {
                let mut zp = z;
                zp[j] += opts.fd_step;
                let rp = self.residual_raw(c, &zp, blend);
                for i in 0..dim {
                    jac[(i, j + 1)] = (rp[i] - r[i]) / opts.fd_step;
                }
            }
            let rhs = DVector::from_iterator(dim, r.iter().map(|v| -v));
            let svd = jac.svd(true, true);
            let smax = svd.singular_values.max();
            let dx = svd
                .solve(&rhs, 1e-12 * smax)
                .map_err(|e| Error::NoConvergence(format!("singular Newton system: {e}")))?;
            let f0 = sq(&r);
            let mut lambda = 1.0;
            loop {
                let mut cn = c + lambda * dx[0];
                if cn <= 0.0 {
                    cn = 0.5 * c;
                }
                let mut zn = z;
                for i in 0..=n {
                    zn[i] += lambda * dx[i + 1];
                }
                let zn = clamp_zeta(zn, opts.zeta_clamp);
                let rn = self.residual_raw(cn, &zn, blend);
                if sq(&rn) <= (1.0 - 1e-4 * lambda) * f0 {
                    c = cn;
                    z = zn;
                    r = rn;
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-10 {
                    return Err(Error::NoConvergence(format!(
                        "line search stalled after {it} iterations at |F| = {:e}",
                        maxabs(&r)
                    )));
                }
            }
        }
        if maxabs(&r) < target {
            return Ok((c, z, opts.max_iter, maxabs(&r)));
        }
        Err(Error::NoConvergence(format!("no convergence in {} iterations (|F| = {:e})", opts.max_iter, maxabs(&r))))
    }

    /// Coefficients of all `fields` at one degree where each has converged.
    fn common(&self, fields: &[SphereField], min_degree: usize) -> Result<Vec<Coeffs>> {
        let mut degree = min_degree;
        for f in fields {
            let (c, _) = self.engine.converged_from(f, degree)?;
            degree = degree.max(c.degree);
        }
        fields.iter().map(|f| self.engine.coeffs_at(f, degree)).collect()
    }

    /// Spectral residual `(a_2s[u - c v, v], a_2s[u - c v, d_i v])`, the
    /// remainder energy and the truncation degree used.
    pub fn residual_spectral(&self, c: f64, zeta: &Point) -> Result<(Vec<f64>, f64, usize)> {
        let n = self.n();
        let params = self.engine.params;
        let b = Bubble::unit(n, *zeta)?;
        let mut fields = vec![b.field(&params)];
        for i in 0..=n {
            fields.push(b.dzeta_field(&params, i));
        }
        let coeffs = self.common(&fields, self.coeffs.degree)?;
        let degree = coeffs[0].degree;
        let uc = if degree == self.coeffs.degree { self.coeffs.clone() } else { self.engine.coeffs_at(&self.u, degree)? };
        let rho = uc.combine(1.0, &coeffs[0], -c);
        let f: Vec<f64> = coeffs.iter().map(|phi| self.engine.bilinear(&rho, phi)).collect();
        Ok((f, self.engine.value(&rho), degree))
    }

    /// Newton from one start, followed by the spectral checks.
    pub fn solve_branch(&self, c0: f64, z0: Point, label: &str, opts: &SolverOptions) -> Result<Decomposition> {
        let (c, z, iterations, residual) = match self.newton(c0, z0, None, opts) {
            Ok(sol) => sol,
            Err(first) => self.homotopy(c0, z0, opts).map_err(|_| first)?,
        };
        self.finish(c, z, iterations, residual, label, opts)
    }

    fn homotopy(&self, c0: f64, z0: Point, opts: &SolverOptions) -> Result<(f64, Point, usize, f64)> {
        let h0 = Bubble::new(self.n(), c0, clamp_zeta(z0, opts.zeta_clamp))?;
        let (mut c, mut z) = (c0, h0.zeta);
        let mut total = 0;
        let mut last = 0.0;
        for lambda in [0.25, 0.5, 0.75, 1.0] {
            let blend = if lambda < 1.0 { Some(Blend { lambda, h0 }) } else { None };
            let (cn, zn, it, r) = self.newton(c, z, blend, opts)?;
            c = cn;
            z = zn;
            total += it;
            last = r;
        }
        Ok((c, z, total, last))
    }

    fn finish(&self, c: f64, z: Point, iterations: usize, residual: f64, label: &str, opts: &SolverOptions) -> Result<Decomposition> {
        let scale = self.scale();
        let (f, rho_energy, degree) = self.residual_spectral(c, &z)?;
        let orthogonality = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if orthogonality > 1e-8 * scale {
            return Err(Error::NoConvergence(format!(
                "spectral orthogonality {orthogonality:e} exceeds 1e-8 * scale at zeta = {:?}",
                &z[..=self.n()]
            )));
        }
        if residual >= opts.tol * scale {
            return Err(Error::NoConvergence(format!("residual {residual:e} above tolerance")));
        }
        Ok(Decomposition {
            c,
            zeta: z[..=self.n()].to_vec(),
            residual_norm: residual,
            orthogonality,
            rho_energy,
            rho_energy_identity: self.a2s() - self.alpha0 * c * c * self.area,
            degree,
            iterations,
            branch: label.to_string(),
        })
    }

    /// `-(n+1) int w u / (sigma int u)`, the bubble parameter matching the
    /// first moment of `u` to first order, clamped into the ball of radius 0.9.
    pub fn center_of_mass(&self) -> Point {
        let n = self.n();
        let t = transform_for(n, self.coeffs.degree);
        let us = self.u.samples(&t.grid, Exec::Sequential);
        let mass: f64 = us.iter().zip(&t.grid.weights).map(|(u, w)| u * w).sum();
        let mut z = [0.0; 3];
        for i in 0..=n {
            let m: f64 = us.iter().zip(&t.grid.weights).zip(&t.grid.nodes).map(|((u, w), p)| u * w * p[i]).sum();
            z[i] = -(n as f64 + 1.0) * m / (self.engine.params.sigma * mass);
        }
        clamp_zeta(z, 0.9)
    }

    fn starts(&self, opts: &SolverOptions) -> Vec<(String, Point)> {
        let n = self.n();
        let mut starts = vec![("center_of_mass".to_string(), self.center_of_mass()), ("origin".to_string(), [0.0; 3])];
        let dirs: Vec<Point> = if n == 1 {
            (0..8)
                .map(|k| {
                    let a = std::f64::consts::PI * k as f64 / 4.0;
                    [a.cos(), a.sin(), 0.0]
                })
                .collect()
        } else {
            let mut d: Vec<Point> = Vec::new();
            for i in 0..3 {
                for s in [1.0, -1.0] {
                    let mut e = [0.0; 3];
                    e[i] = s;
                    d.push(e);
                }
            }
            let h = 1.0 / 3f64.sqrt();
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        d.push([sx * h, sy * h, sz * h]);
                    }
                }
            }
            d
        };
        for (k, d) in dirs.iter().enumerate() {
            for t in MESH_RADII {
                starts.push((format!("mesh:{k}@{t}"), [t * d[0], t * d[1], t * d[2]]));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for k in 0..opts.budget {
            let dir = random_unit(n, &mut rng);
            let r = 0.9 * rand::Rng::random::<f64>(&mut rng).powf(1.0 / (n as f64 + 1.0));
            starts.push((format!("random:{k}"), [r * dir[0], r * dir[1], r * dir[2]]));
        }
        starts
    }

    /// Multistart enumeration of critical points, deduplicated and sorted by
    /// descending `c`, then lexicographically by `zeta`.
    pub fn enumerate(&self, opts: &SolverOptions) -> Result<CriticalPointSet> {
        let starts = self.starts(opts);
        let results = self.engine.exec.map(&starts, |(label, z0)| {
            let c0 = self.g(z0) / self.area;
            self.solve_branch(c0, *z0, label, opts)
        });
        let mut points: Vec<Decomposition> = Vec::new();
        let mut failed = 0;
        for r in results {
            match r {
                Ok(d) => {
                    match points.iter_mut().find(|p| same_point(p, &d, opts.dedup_radius)) {
                        Some(p) if d.residual_norm < p.residual_norm => {
                            let branch = p.branch.clone();
                            *p = Decomposition { branch, ..d };
                        }
                        Some(_) => {}
                        None => points.push(d),
                    }
                }
                Err(e) if e.is_numerical() => failed += 1,
                Err(e) => return Err(e),
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyCriticalSet);
        }
        points.sort_by(canonical_order);
        Ok(CriticalPointSet { points, complete: failed == 0, starts: starts.len(), failed_starts: failed })
    }

    /// `d(u)` from the enumerated critical set.
    pub fn distance(&self, opts: &SolverOptions) -> Result<Distance> {
        let set = self.enumerate(opts)?;
        self.distance_from(set)
    }

    pub fn distance_from(&self, set: CriticalPointSet) -> Result<Distance> {
        let scale = self.scale();
        let min = set.points.iter().map(|p| p.rho_energy).fold(f64::INFINITY, f64::min);
        if self.deficit.deficit < 1e-9 * scale && min < 1e-9 * scale {
            return Err(Error::OnManifold { deficit: self.deficit.deficit, scale });
        }
        for p in &set.points {
            let diff = (p.rho_energy - p.rho_energy_identity).abs();
            if diff > 1e-6 * p.rho_energy.abs() + 1e-12 * scale {
                return Err(Error::Invariant(format!(
                    "remainder energy {} disagrees with a_2s[u] - alpha(0) c^2 |S^n| = {} at branch {}",
                    p.rho_energy, p.rho_energy_identity, p.branch
                )));
            }
            if p.rho_energy < -1e-8 * scale {
                return Err(Error::Invariant(format!("negative remainder energy {} at branch {}", p.rho_energy, p.branch)));
            }
        }
        if !(min > 0.0) {
            return Err(Error::Invariant(format!("modified distance {min} is not positive")));
        }
        let tie = 1e-9 * min + 1e-13 * scale;
        let attainers: Vec<usize> =
            set.points.iter().enumerate().filter(|(_, p)| p.rho_energy - min <= tie).map(|(i, _)| i).collect();
        Ok(Distance {
            distance: min,
            argmin: set.points[attainers[0]].clone(),
            attainers,
            low_confidence: !set.complete,
            set,
            deficit: self.deficit.clone(),
        })
    }
}

fn clamp_zeta(mut z: Point, radius: f64) -> Point {
    let r = sphere::norm(&z);
    if r > radius {
        for v in z.iter_mut() {
            *v *= radius / r;
        }
    }
    z
}

fn same_point(a: &Decomposition, b: &Decomposition, radius: f64) -> bool {
    (a.c - b.c).abs() <= radius && a.zeta.iter().zip(&b.zeta).all(|(x, y)| (x - y).abs() <= radius)
}

fn canonical_order(a: &Decomposition, b: &Decomposition) -> Ordering {
    b.c.total_cmp(&a.c).then_with(|| {
        a.zeta
            .iter()
            .zip(&b.zeta)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    })
}

/// Removes from `g` its a_2s-projection onto the tangent frame of the
/// bubble manifold at `v_zeta`.
pub fn project_off_tangent(engine: &SpectralEngine, zeta: &Point, g: &SphereField) -> Result<SphereField> {
    let n = engine.n();
    let params = engine.params;
    let b = Bubble::unit(n, *zeta)?;
    let mut frame = vec![b.field(&params)];
    for i in 0..=n {
        frame.push(b.dzeta_field(&params, i));
    }
    let mut degree = 0;
    for f in frame.iter().chain(std::iter::once(g)) {
        degree = degree.max(engine.converged_from(f, degree)?.0.degree);
    }
    let coeffs: Vec<Coeffs> = frame.iter().map(|f| engine.coeffs_at(f, degree)).collect::<Result<_>>()?;
    let gc = engine.coeffs_at(g, degree)?;
    let k = frame.len();
    let gram = DMatrix::from_fn(k, k, |i, j| engine.bilinear(&coeffs[i], &coeffs[j]));
    let rhs = DVector::from_iterator(k, coeffs.iter().map(|c| engine.bilinear(&gc, c)));
    let x = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoConvergence("singular tangent Gram matrix".into()))?;
    let mut out = g.clone();
    for (f, xi) in frame.iter().zip(x.iter()) {
        out = out.combine(1.0, f, -xi);
    }
    Ok(out)
}

/// Spectral residual `F(c, zeta, u)`.
pub fn residual_f(engine: &SpectralEngine, u: &SphereField, c: f64, zeta: &Point) -> Result<Vec<f64>> {
    Ok(Target::new(engine, u)?.residual_spectral(c, zeta)?.0)
}

pub fn solve_branch(
    engine: &SpectralEngine,
    u: &SphereField,
    init: (f64, Point),
    opts: &SolverOptions,
) -> Result<Decomposition> {
    Target::new(engine, u)?.solve_branch(init.0, init.1, "init", opts)
}

pub fn enumerate_critical_points(engine: &SpectralEngine, u: &SphereField, opts: &SolverOptions) -> Result<CriticalPointSet> {
    Target::new(engine, u)?.enumerate(opts)
}

pub fn distance(engine: &SpectralEngine, u: &SphereField, opts: &SolverOptions) -> Result<Distance> {
    Target::new(engine, u)?.distance(opts)
}
