//! Stereographic projection, the conformal maps `R o gamma_{delta, xi}`,
//! pullbacks `u_Phi`, the normalized bubbles `v_zeta` and the balance map.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SphereField;
use crate::par::Exec;
use crate::specialfn::{balance_constant, SpectralParams};
use crate::sphere::{self, Point, QuadratureGrid};

pub type Mat3 = [[f64; 3]; 3];

/// Largest bubble parameter allowed on solver-facing paths.
pub const ZETA_CLAMP: f64 = 0.995;

/// Above this dilation the balance integral is evaluated after substitution.
pub const BALANCE_SUBSTITUTION_DELTA: f64 = 10.0;

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_vec(m: &Mat3, v: &Point) -> Point {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Inverse stereographic projection `R^n -> S^n` (north pole at `x = 0`) and
/// its Jacobian `(2 / (1 + |x|^2))^n`.
pub fn stereo(n: usize, x: &Point) -> (Point, f64) {
    let r2: f64 = x[..n].iter().map(|v| v * v).sum();
    let mut w = [0.0; 3];
    for i in 0..n {
        w[i] = 2.0 * x[i] / (1.0 + r2);
    }
    w[n] = (1.0 - r2) / (1.0 + r2);
    (w, (2.0 / (1.0 + r2)).powi(n as i32))
}

/// Stereographic projection `S^n -> R^n` and its Jacobian `(1 + w_N)^{-n}`.
pub fn stereo_inv(n: usize, w: &Point) -> Result<(Point, f64)> {
    let d = 1.0 + w[n];
    if d < 1e-14 {
        return Err(Error::InvalidInput("stereographic projection is undefined at the south pole".into()));
    }
    let mut x = [0.0; 3];
    for i in 0..n {
        x[i] = w[i] / d;
    }
    Ok((x, d.powi(-(n as i32))))
}

/// Rotation taking `xi` to the north pole, acting in the `xi`-north plane.
/// Near the south pole a half turn in the (e_1, north) plane is applied first.
pub fn rotation_to_north(n: usize, xi: &Point) -> Mat3 {
    let north = sphere::north(n);
    let rodrigues = |v: &Point| -> Mat3 {
        let c = sphere::dot(v, &north);
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = north[i] * v[j] - v[i] * north[j];
            }
        }
        let k2 = mat_mul(&k, &k);
        let mut r = IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] += k[i][j] + k2[i][j] / (1.0 + c);
            }
        }
        r
    };
    if sphere::dot(xi, &north) > -0.5 {
        rodrigues(xi)
    } else {
        let mut flip = IDENTITY;
        flip[0][0] = -1.0;
        flip[n][n] = -1.0;
        let turned = mat_vec(&flip, xi);
        mat_mul(&rodrigues(&turned), &flip)
    }
}

/// `Phi = rotation o gamma_{delta, xi}`, where `gamma_{delta, xi}` dilates by
/// `delta` in stereographic coordinates centred at `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalMap {
    pub n: usize,
    pub rotation: Mat3,
    pub delta: f64,
    pub xi: Point,
}

impl ConformalMap {
    pub fn identity(n: usize) -> Self {
        Self { n, rotation: IDENTITY, delta: 1.0, xi: sphere::north(n) }
    }

    pub fn rotation(n: usize, rotation: Mat3) -> Self {
        Self { rotation, ..Self::identity(n) }
    }

    pub fn gamma(n: usize, delta: f64, xi: Point) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("dilation {delta} must be positive")));
        }
        let nx = sphere::norm(&xi);
        if (nx - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("centre xi has norm {nx}, expected 1")));
        }
        Ok(Self { n, rotation: IDENTITY, delta, xi })
    }

    /// The map whose pullback sends `v_zeta` to the constant 1.
    pub fn flattening(n: usize, zeta: &Point) -> Self {
        let t = sphere::norm(zeta);
        if t < 1e-15 {
            return Self::identity(n);
        }
        let xi = [zeta[0] / t, zeta[1] / t, zeta[2] / t];
        let delta = ((1.0 + t) / (1.0 - t)).sqrt();
        Self { n, rotation: IDENTITY, delta: 1.0 / delta, xi }
    }

    /// Random map with `delta` log-uniform in `[1/delta_max, delta_max]`.
    pub fn random<R: Rng>(n: usize, rng: &mut R, delta_max: f64) -> Self {
        let delta = delta_max.powf(2.0 * rng.random::<f64>() - 1.0);
        Self { n, rotation: random_rotation(n, rng), delta, xi: random_unit(n, rng) }
    }

    fn gamma_apply(&self, w: &Point) -> Point {
        let d = self.delta;
        let d2 = d * d;
        let c = sphere::dot(&self.xi, w);
        let den = (1.0 + d2) + (1.0 - d2) * c;
        let a = (1.0 + c) - d2 * (1.0 - c);
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = (2.0 * d * (w[k] - c * self.xi[k]) + a * self.xi[k]) / den;
        }
        out
    }

    pub fn apply(&self, w: &Point) -> Point {
        mat_vec(&self.rotation, &self.gamma_apply(w))
    }

    /// Same map evaluated through `O_xi^T o S o D_delta o S^{-1} o O_xi`.
    pub fn apply_factored(&self, w: &Point) -> Result<Point> {
        let o = rotation_to_north(self.n, &self.xi);
        let (x, _) = stereo_inv(self.n, &mat_vec(&o, w))?;
        let scaled = [self.delta * x[0], self.delta * x[1], self.delta * x[2]];
        let (y, _) = stereo(self.n, &scaled);
        Ok(mat_vec(&self.rotation, &mat_vec(&transpose(&o), &y)))
    }

    /// Jacobian determinant `(2 delta / ((1 + delta^2) + (1 - delta^2) xi.w))^n`.
    pub fn jacobian(&self, w: &Point) -> f64 {
        let d2 = self.delta * self.delta;
        let den = (1.0 + d2) + (1.0 - d2) * sphere::dot(&self.xi, w);
        (2.0 * self.delta / den).powi(self.n as i32)
    }

    pub fn inverse(&self) -> Self {
        Self {
            n: self.n,
            rotation: transpose(&self.rotation),
            delta: 1.0 / self.delta,
            xi: mat_vec(&self.rotation, &self.xi),
        }
    }
}

pub fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Point {
    let phi = 2.0 * PI * rng.random::<f64>();
    if n == 1 {
        return [phi.cos(), phi.sin(), 0.0];
    }
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let r = (1.0 - z * z).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

/// Haar-random rotation of the first `n + 1` coordinates.
pub fn random_rotation<R: Rng>(n: usize, rng: &mut R) -> Mat3 {
    if n == 1 {
        let t = 2.0 * PI * rng.random::<f64>();
        let (s, c) = t.sin_cos();
        return [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    }
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (x, y, z, w) = (a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

/// `u_Phi(w) = u(Phi(w)) J_Phi(w)^{(n-2s)/(2n)}`.
pub fn pullback(u: &SphereField, map: &ConformalMap, params: &SpectralParams) -> SphereField {
    let f = u.evaluator();
    let map = *map;
    let e = 1.0 / params.p;
    SphereField::new(u.n(), format!("pullback({})", u.label()), move |w| f(&map.apply(w)) * map.jacobian(w).powf(e))
}

/// `h = c v_zeta` with `v_zeta(w) = (1-|zeta|^2)^{-sigma/2} (1 - zeta.w)^{sigma}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub n: usize,
    pub c: f64,
    pub zeta: Point,
}

impl Bubble {
    pub fn new(n: usize, c: f64, zeta: Point) -> Result<Self> {
        sphere::check_dimension(n)?;
        if zeta[n + 1..].iter().any(|&z| z != 0.0) {
            return Err(Error::InvalidInput(format!("zeta has nonzero coordinates beyond R^{}", n + 1)));
        }
        let r = sphere::norm(&zeta);
        if !r.is_finite() || r >= 1.0 - 1e-12 {
            return Err(Error::InvalidInput(format!("|zeta| = {r} is not inside the unit ball")));
        }
        if !c.is_finite() {
            return Err(Error::InvalidInput(format!("bubble weight {c} is not finite")));
        }
        Ok(Self { n, c, zeta })
    }

    pub fn from_slice(n: usize, c: f64, zeta: &[f64]) -> Result<Self> {
        if zeta.len() != n + 1 {
            return Err(Error::InvalidInput(format!("zeta must have {} components, got {}", n + 1, zeta.len())));
        }
        let mut z = [0.0; 3];
        z[..=n].copy_from_slice(zeta);
        Self::new(n, c, z)
    }

    pub fn unit(n: usize, zeta: Point) -> Result<Self> {
        Self::new(n, 1.0, zeta)
    }

    fn one_minus_norm2(&self) -> f64 {
        1.0 - sphere::dot(&self.zeta, &self.zeta)
    }

    pub fn value(&self, sigma: f64, w: &Point) -> f64 {
        let q = self.one_minus_norm2();
        self.c * q.powf(-0.5 * sigma) * (1.0 - sphere::dot(&self.zeta, w)).powf(sigma)
    }

    /// `d/d zeta_i` of `c v_zeta` at `w`.
    pub fn dzeta(&self, sigma: f64, i: usize, w: &Point) -> f64 {
        let q = self.one_minus_norm2();
        let l = 1.0 - sphere::dot(&self.zeta, w);
        self.value(sigma, w) * sigma * (self.zeta[i] / q - w[i] / l)
    }

    pub fn field(&self, params: &SpectralParams) -> SphereField {
        let b = *self;
        let sigma = params.sigma;
        SphereField::new(self.n, format!("bubble(c = {}, zeta = {:?})", self.c, &self.zeta[..=self.n]), move |w| {
            b.value(sigma, w)
        })
    }

    pub fn dzeta_field(&self, params: &SpectralParams, i: usize) -> SphereField {
        let b = *self;
        let sigma = params.sigma;
        SphereField::new(self.n, format!("d_zeta{i} bubble"), move |w| b.dzeta(sigma, i, w))
    }
}

/// `F(delta, xi) = int gamma(w) J_gamma(w)^{(n+2s)/(2n)} u(w) dw`.
pub fn balance_f(
    u: &SphereField,
    delta: f64,
    xi: &Point,
    params: &SpectralParams,
    grid: &QuadratureGrid,
    exec: Exec,
) -> Result<Point> {
    let map = ConformalMap::gamma(params.n, delta, *xi)?;
    let contributions: Vec<[f64; 3]> = if delta > BALANCE_SUBSTITUTION_DELTA {
        // int eta u_{gamma^{-1}}(eta) d eta, after substituting eta = gamma(w)
        let inv = map.inverse();
        let e = 1.0 / params.p;
        exec.map_range(grid.len(), |k| {
            let eta = &grid.nodes[k];
            let val = u.eval(&inv.apply(eta)) * inv.jacobian(eta).powf(e) * grid.weights[k];
            [eta[0] * val, eta[1] * val, eta[2] * val]
        })
    } else {
        let e = (params.n as f64 + 2.0 * params.s) / (2.0 * params.n as f64);
        let samples = u.samples(grid, exec);
        exec.map_range(grid.len(), |k| {
            let w = &grid.nodes[k];
            let g = map.apply(w);
            let val = map.jacobian(w).powf(e) * samples[k] * grid.weights[k];
            [g[0] * val, g[1] * val, g[2] * val]
        })
    };
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let col: Vec<f64> = contributions.iter().map(|c| c[k]).collect();
        *o = crate::par::pairwise_sum(&col);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { node: 0, value: f64::NAN });
    }
    Ok(out)
}

/// `delta^{(n-2s)/2} F(delta, xi) / (c_bal 2^{(n-2s)/2} u(xi))`, which tends to
/// `xi` as `delta -> infinity`.
pub fn balance_normalized(
    u: &SphereField,
    delta: f64,
    xi: &Point,
    params: &SpectralParams,
    grid: &QuadratureGrid,
    exec: Exec,
) -> Result<Point> {
    let f = balance_f(u, delta, xi, params, grid, exec)?;
    let e = (params.n as f64 - 2.0 * params.s) / 2.0;
    let scale = delta.powf(e) / (balance_constant(params) * 2f64.powf(e) * u.eval(xi));
    Ok([f[0] * scale, f[1] * scale, f[2] * scale])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::build_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> SpectralParams {
        SpectralParams::new(2, 1.5).unwrap()
    }

    #[test]
    fn stereo_pair() {
        let (w, j) = stereo(2, &[0.0; 3]);
        assert_eq!(w, [0.0, 0.0, 1.0]);
        assert_eq!(j, 4.0);
        let (w1, j1) = stereo(1, &[0.0; 3]);
        assert_eq!(w1, [0.0, 1.0, 0.0]);
        assert_eq!(j1, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = [4.0 * rng.random::<f64>() - 2.0, 4.0 * rng.random::<f64>() - 2.0, 0.0];
            let (w, j) = stereo(2, &x);
            assert!((sphere::norm(&w) - 1.0).abs() < 1e-15);
            let (y, ji) = stereo_inv(2, &w).unwrap();
            assert!((y[0] - x[0]).abs() < 1e-13 && (y[1] - x[1]).abs() < 1e-13);
            assert!((j * ji - 1.0).abs() < 1e-13);
        }
        assert!(stereo_inv(2, &[0.0, 0.0, -1.0]).is_err());
    }

    #[test]
    fn rotation_to_north_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xis: Vec<Point> = (0..20).map(|_| random_unit(2, &mut rng)).collect();
        xis.push([0.0, 0.0, -1.0]);
        xis.push([0.0, 0.0, 1.0]);
        for xi in xis {
            let o = rotation_to_north(2, &xi);
            let oto = mat_mul(&transpose(&o), &o);
            for i in 0..3 {
                for j in 0..3 {
                    let t = if i == j { 1.0 } else { 0.0 };
                    assert!((oto[i][j] - t).abs() < 1e-13);
                }
            }
            let m = mat_vec(&o, &xi);
            assert!((m[2] - 1.0).abs() < 1e-13);
        }
        assert_eq!(rotation_to_north(2, &[0.0, 0.0, 1.0]), IDENTITY);
    }

    #[test]
    fn direct_and_factored_maps_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2] {
            for _ in 0..10 {
                let map = ConformalMap::random(n, &mut rng, 3.0);
                for _ in 0..10 {
                    let w = random_unit(n, &mut rng);
                    let a = map.apply(&w);
                    let b = map.apply_factored(&w).unwrap();
                    for k in 0..3 {
                        assert!((a[k] - b[k]).abs() < 1e-12, "n={n} {a:?} {b:?}");
                    }
                    assert!((sphere::norm(&a) - 1.0).abs() < 1e-13);
                    assert!(map.jacobian(&w) > 0.0);
                    let back = map.inverse().apply(&a);
                    for k in 0..3 {
                        assert!((back[k] - w[k]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn jacobian_pushes_measure_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = build_grid(2, 64).unwrap();
        for _ in 0..5 {
            let map = ConformalMap::random(2, &mut rng, 3.0);
            let s: Vec<f64> = g.nodes.iter().map(|w| map.jacobian(w)).collect();
            let total = g.integrate_samples(&s).unwrap();
            assert!((total / (4.0 * PI) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn pullback_of_one_is_a_bubble() {
        let p = params();
        let xi = [0.6, 0.0, 0.8];
        let map = ConformalMap::gamma(2, 2.0, xi).unwrap();
        let h = pullback(&SphereField::constant(2, 1.0), &map, &p);
        let t = (4.0 - 1.0) / (4.0 + 1.0);
        let b = Bubble::unit(2, [t * xi[0], t * xi[1], t * xi[2]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let w = random_unit(2, &mut rng);
            assert!((h.eval(&w) - b.value(p.sigma, &w)).abs() < 1e-13 * b.value(p.sigma, &w));
        }
        let flat = ConformalMap::flattening(2, &b.zeta);
        let one = pullback(&b.field(&p), &flat, &p);
        for _ in 0..20 {
            let w = random_unit(2, &mut rng);
            assert!((one.eval(&w) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pullback_group_action() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = SphereField::new(2, "u", |w| 1.0 + 0.3 * w[0] + 0.2 * w[1] * w[2]);
        let map = ConformalMap::random(2, &mut rng, 3.0);
        let back = pullback(&pullback(&u, &map, &p), &map.inverse(), &p);
        for _ in 0..30 {
            let w = random_unit(2, &mut rng);
            assert!((back.eval(&w) - u.eval(&w)).abs() < 1e-12);
        }
        let rot = ConformalMap::rotation(2, random_rotation(2, &mut rng));
        let one = pullback(&SphereField::constant(2, 1.0), &rot, &p);
        assert!((one.eval(&[0.0, 1.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bubble_derivative_matches_finite_difference() {
        let p = params();
        let b = Bubble::unit(2, [0.2, -0.3, 0.4]).unwrap();
        let w = [0.48, 0.6, 0.64];
        let h = 1e-5;
        for i in 0..3 {
            let mut zp = b.zeta;
            let mut zm = b.zeta;
            zp[i] += h;
            zm[i] -= h;
            let fd = (Bubble::unit(2, zp).unwrap().value(p.sigma, &w) - Bubble::unit(2, zm).unwrap().value(p.sigma, &w)) / (2.0 * h);
            assert!((fd - b.dzeta(p.sigma, i, &w)).abs() < 1e-8);
        }
        // at zeta = 0 the derivative is -sigma w_i
        let b0 = Bubble::unit(2, [0.0; 3]).unwrap();
        assert!((b0.dzeta(p.sigma, 2, &w) + p.sigma * w[2]).abs() < 1e-15);
        assert_eq!(b0.value(p.sigma, &w), 1.0);
    }

    #[test]
    fn bubble_validation() {
        assert!(Bubble::new(2, 1.0, [0.0, 0.0, 1.0]).is_err());
        assert!(Bubble::new(1, 1.0, [0.0, 0.0, 0.5]).is_err());
        assert!(Bubble::from_slice(2, 1.0, &[0.1, 0.2]).is_err());
        assert!(Bubble::from_slice(1, 1.0, &[0.1, 0.2]).is_ok());
    }

    #[test]
    fn balance_vanishes_at_identity() {
        let p = params();
        let g = build_grid(2, 24).unwrap();
        let f = balance_f(&SphereField::constant(2, 1.0), 1.0, &[0.0, 0.6, 0.8], &p, &g, Exec::Sequential).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn balance_routes_agree_at_moderate_dilation() {
        let p = params();
        let g = build_grid(2, 96).unwrap();
        let u = SphereField::new(2, "u", |w| 1.0 + 0.2 * w[0] + 0.1 * w[2] * w[2]);
        let xi = [0.0, 0.6, 0.8];
        let map = ConformalMap::gamma(2, 4.0, xi).unwrap();
        let direct = balance_f(&u, 4.0, &xi, &p, &g, Exec::Sequential).unwrap();
        let inv = map.inverse();
        let e = 1.0 / p.p;
        let mut sub = [0.0; 3];
        for (eta, w) in g.nodes.iter().zip(&g.weights) {
            let val = u.eval(&inv.apply(eta)) * inv.jacobian(eta).powf(e) * w;
            for k in 0..3 {
                sub[k] += eta[k] * val;
            }
        }
        for k in 0..3 {
            assert!((direct[k] - sub[k]).abs() < 1e-9 * (1.0 + direct[k].abs()), "{direct:?} {sub:?}");
        }
    }
}
