//! Named invariant suites with machine-readable pass/fail per check.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::{pullback, random_unit, stereo, stereo_inv, Bubble, ConformalMap};
use crate::decompose::{project_off_tangent, SolverOptions, Target};
use crate::error::{Error, Result};
use crate::field::{random_positive, SphereField};
use crate::quadform::SpectralEngine;
use crate::specialfn::{
    alpha, gamma, local_constant, sobolev_constant, sobolev_constant_from_area, sobolev_constant_normalized,
    sphere_area, SpectralParams,
};
use crate::sphere::{self, basis_len, eval_basis, transform_for, zonal, Coeffs, Point};
use crate::stability::{
    alpha_deviation, balance_sweep, check_balance_constant, check_concentration_constant, concentration_ratio,
    probe_strict, quotient,
};

/// The parameter pairs covered by `verify --suite all`.
pub const DEFAULT_MATRIX: [(usize, f64); 4] = [(1, 0.75), (1, 2.0), (2, 1.5), (2, 2.5)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Constants,
    Sphere,
    Conformal,
    Quadform,
    Decompose,
    Stability,
    Asymptotics,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 8] =
        ["constants", "sphere", "conformal", "quadform", "decompose", "stability", "asymptotics", "all"];

    fn members(self) -> Vec<Suite> {
        use Suite::*;
        match self {
            All => vec![Constants, Sphere, Conformal, Quadform, Decompose, Stability, Asymptotics],
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(Suite::NAMES[*self as usize])
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use Suite::*;
        let all = [Constants, Sphere, Conformal, Quadform, Decompose, Stability, Asymptotics, All];
        Suite::NAMES
            .iter()
            .position(|n| *n == s)
            .map(|k| all[k])
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite '{s}' (expected one of {})", Suite::NAMES.join(", "))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub solver: SolverOptions,
    /// Relative perturbation applied to every eigenvalue in the constants
    /// suite; a negative control for the checks.
    pub tamper_alpha: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, solver: SolverOptions { budget: 8, ..Default::default() }, tamper_alpha: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub claim: String,
    pub passed: bool,
    /// The measured discrepancy (or quantity) compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n: usize,
    pub s: f64,
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

enum Cmp {
    /// Passes when `value <= tolerance`.
    AtMost,
    /// Passes when `value >= tolerance`.
    AtLeast,
}

struct Runner {
    suite: Suite,
    checks: Vec<Check>,
}

impl Runner {
    fn check(&mut self, name: &str, claim: &str, cmp: Cmp, tolerance: f64, f: impl FnOnce() -> Result<(f64, String)>) {
        let (passed, value, detail) = match f() {
            Ok((v, d)) => {
                let ok = match cmp {
                    Cmp::AtMost => v <= tolerance,
                    Cmp::AtLeast => v >= tolerance,
                };
                (ok, v, d)
            }
            Err(e) => (false, f64::NAN, format!("error: {e}")),
        };
        self.checks.push(Check {
            suite: self.suite,
            name: name.to_string(),
            claim: claim.to_string(),
            passed,
            value,
            tolerance,
            detail,
        });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Runs `suite` for one parameter pair.
pub fn run(params: &SpectralParams, suite: Suite, opts: &VerifyOptions) -> VerifyReport {
    let engine = SpectralEngine::new(*params);
    let mut checks = Vec::new();
    for s in suite.members() {
        let mut r = Runner { suite: s, checks: Vec::new() };
        match s {
            Suite::Constants => constants(&mut r, params, opts),
            Suite::Sphere => sphere_suite(&mut r, params, opts),
            Suite::Conformal => conformal(&mut r, &engine, opts),
            Suite::Quadform => quadform(&mut r, &engine, opts),
            Suite::Decompose => decompose(&mut r, &engine, opts),
            Suite::Stability => stability(&mut r, &engine, opts),
            Suite::Asymptotics => asymptotics(&mut r, &engine),
            Suite::All => unreachable!("expanded by members"),
        }
        checks.extend(r.checks);
    }
    VerifyReport { n: params.n, s: params.s, suite, passed: checks.iter().all(|c| c.passed), checks }
}

fn constants(r: &mut Runner, p: &SpectralParams, opts: &VerifyOptions) {
    let factor = 1.0 + opts.tamper_alpha.unwrap_or(0.0);
    let al = |l: usize| alpha(p, l) * factor;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    r.check("gamma_reference_values", "Gamma at 1/2, 5/2 and -1/2 matches its classical values", Cmp::AtMost, 1e-13, || {
        let e = rel(gamma(0.5)?, sqrt_pi)
            .max(rel(gamma(2.5)?, 0.75 * sqrt_pi))
            .max(rel(gamma(-0.5)?, -2.0 * sqrt_pi));
        Ok((e, format!("worst relative error {e:.2e}")))
    });
    r.check("sobolev_constant_routes", "closed form of S_s equals alpha(0) |S^n|^{2s/n}", Cmp::AtMost, 1e-12, || {
        let closed = sobolev_constant(p);
        let via_alpha = al(0) * sphere_area(p.n).powf(2.0 * p.s / p.n as f64);
        Ok((rel(via_alpha, closed), format!("S_s = {closed:.12}, alpha route {via_alpha:.12}")))
    });
    r.check("sobolev_constant_normalized", "S_s on the normalized measure equals alpha(0)", Cmp::AtMost, 1e-12, || {
        let v = sobolev_constant_normalized(p);
        Ok((rel(v, al(0)), format!("{v:.12}")))
    });
    r.check("sobolev_constant_sign", "S_s < 0 exactly when s - n/2 < 1", Cmp::AtLeast, 1.0, || {
        let neg = sobolev_constant(p) < 0.0 && sobolev_constant_from_area(p) < 0.0;
        Ok((f64::from(u8::from(neg == p.lower_window())), format!("S_s = {:.6}", sobolev_constant(p))))
    });
    r.check("alpha_one_ratio", "alpha(1) = (p - 1) alpha(0)", Cmp::AtMost, 1e-12, || {
        Ok((rel(al(1), (p.p - 1.0) * al(0)), format!("alpha(1) = {:.12}", al(1))))
    });
    r.check("local_constant_identity", "1 - alpha(1)/alpha(2) = 4s/(n+2s+2)", Cmp::AtMost, 1e-12, || {
        let lc = local_constant(p);
        Ok((rel(1.0 - al(1) / al(2), lc), format!("local constant {lc:.12}")))
    });
    r.check("alpha_reference", "alpha matches a direct Gamma ratio at degree 3", Cmp::AtMost, 1e-12, || {
        let h = p.n as f64 / 2.0;
        let direct = gamma(3.0 + h + p.s)? / gamma(3.0 + h - p.s)?;
        Ok((rel(al(3), direct), format!("alpha(3) = {:.12}", al(3))))
    });
}

fn sphere_suite(r: &mut Runner, p: &SpectralParams, opts: &VerifyOptions) {
    let n = p.n;
    let degree = 24;
    r.check("quadrature_moments", "the grid integrates 1 and w_N^2 exactly", Cmp::AtMost, 1e-13, || {
        let t = transform_for(n, degree);
        let area = sphere::integrate(&t.grid, |_| 1.0)?;
        let second = sphere::integrate(&t.grid, |w| w[n] * w[n])?;
        let e = rel(area, sphere_area(n)).max(rel(second, sphere_area(n) / (n as f64 + 1.0)));
        Ok((e, format!("|S^n| = {area:.15}")))
    });
    r.check("basis_orthonormality", "real harmonics are orthonormal on the grid", Cmp::AtMost, 1e-12, || {
        let l = 8;
        let t = transform_for(n, 2 * l);
        let vals: Vec<Vec<f64>> = t.grid.nodes.iter().map(|w| eval_basis(n, l, w)).collect();
        let len = basis_len(n, l);
        let mut worst: f64 = 0.0;
        for a in 0..len {
            for b in a..len {
                let g: f64 = vals.iter().zip(&t.grid.weights).map(|(v, w)| v[a] * v[b] * w).sum();
                worst = worst.max((g - f64::from(u8::from(a == b))).abs());
            }
        }
        Ok((worst, format!("max Gram deviation {worst:.2e} over {len} functions")))
    });
    r.check("transform_round_trip", "analysis recovers random band-limited coefficients", Cmp::AtMost, 1e-12, || {
        let l = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let c: Vec<f64> = (0..basis_len(n, l)).map(|_| rng.random::<f64>() - 0.5).collect();
        let cc = c.clone();
        let f = SphereField::new(n, "band-limited", move |w| eval_basis(n, l, w).iter().zip(&cc).map(|(a, b)| a * b).sum());
        let t = transform_for(n, 2 * l);
        let got: Coeffs = t.analyze(&f.samples(&t.grid, crate::Exec::Sequential), crate::Exec::Sequential);
        let e = got.data.iter().enumerate().map(|(k, v)| (v - c.get(k).copied().unwrap_or(0.0)).abs()).fold(0.0, f64::max);
        Ok((e, format!("max coefficient error {e:.2e}")))
    });
}

fn random_map(n: usize, rng: &mut ChaCha8Rng) -> ConformalMap {
    ConformalMap::random(n, rng, 3.0)
}

fn conformal(r: &mut Runner, e: &SpectralEngine, opts: &VerifyOptions) {
    let n = e.n();
    let p = e.params;
    r.check("stereographic_round_trip", "stereographic projection inverts its inverse", Cmp::AtMost, 1e-13, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let w = random_unit(n, &mut rng);
            let (x, _) = stereo_inv(n, &w)?;
            let (back, _) = stereo(n, &x);
            worst = worst.max((0..=n).map(|i| (back[i] - w[i]).abs()).fold(0.0, f64::max));
        }
        Ok((worst, format!("max deviation {worst:.2e}")))
    });
    r.check("bubble_p_norm", "int v_zeta^p = |S^n| across |zeta| up to 0.9", Cmp::AtMost, 1e-6, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut worst: f64 = 0.0;
        for t in [0.0, 0.3, 0.6, 0.9] {
            let d = random_unit(n, &mut rng);
            let v = Bubble::unit(n, [t * d[0], t * d[1], t * d[2]])?.field(&p);
            let (c, _) = e.converged(&v)?;
            let grid = &transform_for(n, c.degree).grid;
            let s = v.samples(grid, e.exec);
            let val = grid.integrate_samples(&s.iter().map(|x| x.powf(p.p)).collect::<Vec<_>>())?;
            worst = worst.max(rel(val, sphere_area(n)));
        }
        Ok((worst, format!("worst relative error {worst:.2e}")))
    });
    r.check("pullback_of_one", "pulling back 1 by gamma_{delta,xi} gives a bubble", Cmp::AtMost, 1e-12, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 1);
        let xi = random_unit(n, &mut rng);
        let delta = 2.5;
        let map = ConformalMap::gamma(n, delta, xi)?;
        let one = pullback(&SphereField::constant(n, 1.0), &map, &p);
        let t = (delta * delta - 1.0) / (delta * delta + 1.0);
        let b = Bubble::unit(n, [t * xi[0], t * xi[1], t * xi[2]])?;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let w = random_unit(n, &mut rng);
            worst = worst.max(rel(one.eval(&w), b.value(p.sigma, &w)));
        }
        Ok((worst, format!("worst relative deviation {worst:.2e}")))
    });
    r.check("inverse_map", "Phi^{-1}(Phi(w)) = w for random conformal maps", Cmp::AtMost, 1e-12, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 2);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let m = random_map(n, &mut rng);
            let inv = m.inverse();
            let w = random_unit(n, &mut rng);
            let back = inv.apply(&m.apply(&w));
            worst = worst.max((0..=n).map(|i| (back[i] - w[i]).abs()).fold(0.0, f64::max));
        }
        Ok((worst, format!("max deviation {worst:.2e}")))
    });
    r.check("measure_pushforward", "int f(Phi w) J_Phi(w) dw = int f", Cmp::AtMost, 1e-10, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 3);
        let m = ConformalMap::random(n, &mut rng, 2.0);
        let f = |w: &Point| 1.0 + w[0] + 0.5 * w[n] * w[n];
        let grid = &transform_for(n, 192).grid;
        let lhs = sphere::integrate(grid, |w| f(&m.apply(w)) * m.jacobian(w))?;
        let rhs = sphere::integrate(grid, f)?;
        Ok((rel(lhs, rhs), format!("{lhs:.12} vs {rhs:.12}")))
    });
}

fn quadform(r: &mut Runner, e: &SpectralEngine, opts: &VerifyOptions) {
    let n = e.n();
    let p = e.params;
    r.check("bubble_energy", "a_2s[v_zeta] = alpha(0) |S^n|", Cmp::AtMost, 1e-6, || {
        let mut worst: f64 = 0.0;
        for t in [0.0, 0.5, 0.9] {
            let mut z = [0.0; 3];
            z[0] = t;
            let (a, _) = e.a2s(&Bubble::unit(n, z)?.field(&p))?;
            worst = worst.max(rel(a, e.alpha()[0] * sphere_area(n)));
        }
        Ok((worst, format!("worst relative error {worst:.2e}")))
    });
    r.check("bubble_deficit", "the deficit vanishes on the bubble family", Cmp::AtMost, 1e-6, || {
        let d = e.deficit(&Bubble::new(n, 2.0, [0.3, 0.4, 0.0])?.field(&p))?;
        Ok((d.deficit.abs() / d.scale, format!("deficit/scale {:.2e}", d.deficit / d.scale)))
    });
    r.check("deficit_nonnegative", "a_2s[u] >= S_s ||u||_p^2 on random positive fields", Cmp::AtLeast, -1e-7, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 4);
        let mut worst = f64::INFINITY;
        for _ in 0..20 {
            let d = e.deficit(&random_positive(&p, 0.6, &mut rng))?;
            worst = worst.min(d.deficit / d.scale);
        }
        Ok((worst, format!("min deficit/scale {worst:.2e}")))
    });
    r.check("conformal_invariance", "a_2s and the deficit are invariant under pullback", Cmp::AtMost, 1e-6, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 5);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let u = random_positive(&p, 0.5, &mut rng);
            let v = pullback(&u, &random_map(n, &mut rng), &p);
            let (du, dv) = (e.deficit(&u)?, e.deficit(&v)?);
            worst = worst.max((du.a2s - dv.a2s).abs().max((du.deficit - dv.deficit).abs()) / du.a2s.abs());
        }
        Ok((worst, format!("worst relative drift {worst:.2e}")))
    });
    r.check("homogeneity", "a_2s[lambda u] = lambda^2 a_2s[u]", Cmp::AtMost, 1e-12, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 6);
        let u = random_positive(&p, 0.5, &mut rng);
        let (a, _) = e.a2s(&u)?;
        let (b, _) = e.a2s(&u.scaled(1.9))?;
        Ok((rel(b, 1.9 * 1.9 * a), format!("a_2s[u] = {a:.10}")))
    });
}

fn decompose(r: &mut Runner, e: &SpectralEngine, opts: &VerifyOptions) {
    let n = e.n();
    let p = e.params;
    let so = opts.solver;
    r.check("ground_truth_recovery", "(c, zeta) is recovered from a constructed decomposition", Cmp::AtMost, 1e-6, || {
        let mut zeta = [0.0; 3];
        zeta[n] = 0.5;
        let g = SphereField::new(n, "g", move |w| w[0] * w[0] - w[1] + 0.3 * w[0] * w[n]);
        let rho = project_off_tangent(e, &zeta, &g)?;
        let u = Bubble::new(n, 1.2, zeta)?.field(&p).combine(1.0, &rho, 0.06);
        let t = Target::new(e, &u)?;
        let d = t.solve_branch(t.g(&[0.0; 3]) / sphere_area(n), [0.0; 3], "origin", &so)?;
        let err = (d.c - 1.2).abs().max((0..=n).map(|i| (d.zeta[i] - zeta[i]).abs()).fold(0.0, f64::max));
        Ok((err, format!("c = {:.10}, zeta = {:?}", d.c, d.zeta)))
    });
    r.check("residual_routes_agree", "spectral residual equals alpha(0) times the gradient of G", Cmp::AtMost, 1e-9, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 7);
        let u = random_positive(&p, 0.5, &mut rng);
        let t = Target::new(e, &u)?;
        let z = [0.2, -0.1, 0.15];
        let mut zz = [0.0; 3];
        zz[..=n].copy_from_slice(&z[..=n]);
        let (fs, _, _) = t.residual_spectral(0.8, &zz)?;
        let fg = t.residual_g(0.8, &zz);
        let e = fs.iter().zip(&fg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / t.scale();
        Ok((e, format!("max difference / scale {e:.2e}")))
    });
    r.check("decomposition_gates", "critical points satisfy the residual, orthogonality and energy gates", Cmp::AtLeast, 1.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 8);
        let mut ok = true;
        let mut count = 0;
        for _ in 0..3 {
            let u = random_positive(&p, 0.6, &mut rng);
            let t = Target::new(e, &u)?;
            let set = t.enumerate(&so)?;
            for q in &set.points {
                ok &= q.residual_norm < 1e-10 * t.scale()
                    && q.orthogonality < 1e-8 * t.scale()
                    && q.rho_energy >= -1e-8 * t.scale()
                    && (q.rho_energy - q.rho_energy_identity).abs() <= 1e-6 * q.rho_energy.abs() + 1e-12 * t.scale();
                count += 1;
            }
        }
        Ok((f64::from(u8::from(ok)), format!("{count} critical points checked")))
    });
    r.check("distance_scaling", "d(lambda u) = lambda^2 d(u)", Cmp::AtMost, 1e-8, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 9);
        let u = random_positive(&p, 0.5, &mut rng);
        let a = Target::new(e, &u)?.distance(&so)?;
        let b = Target::new(e, &u.scaled(1.6))?.distance(&so)?;
        Ok((rel(b.distance, 1.6 * 1.6 * a.distance), format!("d(u) = {:.10e}", a.distance)))
    });
    r.check("distance_covariance", "d(u) is invariant under conformal pullback", Cmp::AtMost, 1e-6, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 10);
        let u = random_positive(&p, 0.4, &mut rng);
        let v = pullback(&u, &ConformalMap::random(n, &mut rng, 2.0), &p);
        let a = Target::new(e, &u)?.distance(&so)?;
        let b = Target::new(e, &v)?.distance(&so)?;
        Ok((rel(b.distance, a.distance), format!("d(u) = {:.10e}, d(u_Phi) = {:.10e}", a.distance, b.distance)))
    });
    r.check("reverse_holder_bound", "c >= ||u||_p |S^n|^{-1/p} at every critical point", Cmp::AtLeast, -1e-8, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 11);
        let u = random_positive(&p, 0.5, &mut rng);
        let t = Target::new(e, &u)?;
        let bound = t.deficit.norm_p * sphere_area(n).powf(-1.0 / p.p);
        let set = t.enumerate(&so)?;
        let m = set.points.iter().map(|q| q.c - bound).fold(f64::INFINITY, f64::min);
        Ok((m, format!("smallest margin {m:.3e}")))
    });
}

fn stability(r: &mut Runner, e: &SpectralEngine, opts: &VerifyOptions) {
    let n = e.n();
    let p = e.params;
    let so = opts.solver;
    let y2 = SphereField::new(n, "Y_2", move |w| zonal(n, 2, w));
    let u = SphereField::constant(n, 1.0).combine(1.0, &y2, 0.02);
    r.check("band_two_limit", "E(1 + eps Y_2) is within O(eps) of 1 - alpha(1)/alpha(2)", Cmp::AtMost, 0.02, || {
        let q = quotient(e, &u, &so, None)?;
        let lc = local_constant(&p);
        Ok(((q.quotient - lc).abs(), format!("E = {:.8}, limit {lc:.8}", q.quotient)))
    });
    r.check("quotient_invariance", "E(c u_Phi) = E(u)", Cmp::AtMost, 1e-6, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 12);
        let u = random_positive(&p, 0.4, &mut rng);
        let q = quotient(e, &u, &so, Some(opts.seed))?;
        let res = q.invariance_residual.unwrap_or(f64::NAN);
        Ok((res, format!("E = {:.8}", q.quotient)))
    });
    let floor = if p.lower_window() { 0.0 } else { 1.0 - 1e-6 };
    let claim = if p.lower_window() {
        "E(u) > 0 on random positive fields"
    } else {
        "E(u) >= 1 on random positive fields when s - n/2 lies in (1, 2)"
    };
    r.check("quotient_lower_bound", claim, Cmp::AtLeast, floor, || {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 13);
        let mut m = f64::INFINITY;
        for _ in 0..4 {
            m = m.min(quotient(e, &random_positive(&p, 0.5, &mut rng), &so, None)?.quotient);
        }
        Ok((m, format!("smallest E {m:.8}")))
    });
    if n == 2 && p.lower_window() {
        r.check("strict_below_local", "min over eps of E(1 + eps rho) falls below 4s/(n+2s+2)", Cmp::AtLeast, 1e-3, || {
            let s = probe_strict(e, &[0.05, -0.05, 0.02, -0.02], &so)?;
            let gap = s.local_constant - s.min_quotient;
            Ok((gap, format!("min E {:.6} at eps = {}, slope {:.5} vs {:.5}", s.min_quotient, s.argmin_epsilon, s.slope_measured, s.slope_predicted)))
        });
    }
}

fn asymptotics(r: &mut Runner, e: &SpectralEngine) {
    let n = e.n();
    let p = e.params;
    r.check("alpha_stirling", "k |alpha(k) k^{-2s} - 1| stays bounded and tends to |s (n-1)|", Cmp::AtMost, 0.05, || {
        let d = alpha_deviation(&p, 1000)?;
        Ok(((d.last_scaled - d.limit).abs() / d.limit.max(1.0), format!("max {:.4}, at k = 1000 {:.4}", d.max_scaled, d.last_scaled)))
    });
    r.check("concentration_constant", "closed form of c_conc matches radial quadrature", Cmp::AtMost, 1e-8, || {
        let c = check_concentration_constant(&p)?;
        Ok((c.relative_error, format!("{:.12}", c.closed_form)))
    });
    r.check("balance_constant", "closed form of c_bal matches radial quadrature", Cmp::AtMost, 1e-8, || {
        let c = check_balance_constant(&p)?;
        Ok((c.relative_error, format!("{:.12}", c.closed_form)))
    });
    let u = SphereField::new(n, "u", move |w| 1.0 + 0.3 * w[n] + 0.2 * w[0] * w[1]);
    r.check("concentration_ratio", "int u v^{p-1} / (u(nu) (1-t)^{n/2p}) is within 3% of c_conc at t = 0.99", Cmp::AtMost, 0.03, || {
        let mut nu = [0.0; 3];
        nu[n] = 1.0;
        let c = concentration_ratio(e, &u, &nu, 0.99)?;
        Ok((c.relative_error, format!("ratio {:.6}, c_conc {:.6}", c.ratio, c.constant)))
    });
    r.check("balance_map_limit", "|G(delta, xi) - xi| decreases over delta = 5, 10, 20, 40", Cmp::AtLeast, 1.0, || {
        let xis: Vec<Point> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].into_iter().take(n + 1).collect();
        let sweeps = balance_sweep(e, &u, &xis, &[5.0, 10.0, 20.0, 40.0])?;
        let ok = sweeps.iter().all(|s| s.monotone);
        let last = sweeps.iter().map(|s| s.errors[3]).fold(0.0, f64::max);
        Ok((f64::from(u8::from(ok)), format!("largest error at delta = 40: {last:.3e}")))
    });
}
