//! Positive functions on S^n carried as evaluators with per-grid caches,
//! negative-exponent norms and the reverse Holder inequality.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::conformal::Bubble;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::specialfn::SpectralParams;
use crate::sphere::{self, basis_index, eval_basis, Point, QuadratureGrid};

/// Fields whose grid minimum exceeds this are accepted as positive.
pub const POSITIVITY_THRESHOLD: f64 = 1e-10;

/// Absolute slack for the reverse Holder gap.
pub const HOLDER_TOL: f64 = 1e-9;

pub type Evaluator = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// `(n, resolution)` of a quadrature grid.
type GridKey = (usize, usize);

#[derive(Default)]
struct Cache {
    samples: Mutex<HashMap<GridKey, Arc<Vec<f64>>>>,
}

/// A real function on S^n. Clones share the sample cache.
#[derive(Clone)]
pub struct SphereField {
    n: usize,
    label: String,
    eval: Evaluator,
    cache: Arc<Cache>,
}

impl fmt::Debug for SphereField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereField").field("n", &self.n).field("label", &self.label).finish()
    }
}

impl SphereField {
    pub fn new<F>(n: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self { n, label: label.into(), eval: Arc::new(f), cache: Arc::default() }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self::new(n, format!("{value}"), move |_| value)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, p: &Point) -> f64 {
        (self.eval)(p)
    }

    pub fn evaluator(&self) -> Evaluator {
        self.eval.clone()
    }

    /// Samples on the grid nodes, computed once per grid.
    pub fn samples(&self, grid: &QuadratureGrid, exec: Exec) -> Arc<Vec<f64>> {
        let key = (grid.n, grid.resolution);
        if let Some(s) = self.cache.samples.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return s.clone();
        }
        let s = Arc::new(exec.map(&grid.nodes, |p| self.eval(p)));
        self.cache
            .samples
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(key)
            .or_insert(s)
            .clone()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let f = self.eval.clone();
        Self::new(self.n, format!("{c} * ({})", self.label), move |p| c * f(p))
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &SphereField, b: f64) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        Self::new(self.n, format!("{a} * ({}) + {b} * ({})", self.label, other.label), move |p| {
            a * f(p) + b * g(p)
        })
    }

    /// Smallest grid sample and its node.
    pub fn grid_min(&self, grid: &QuadratureGrid, exec: Exec) -> (usize, f64) {
        let s = self.samples(grid, exec);
        s.iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best })
    }

    /// Errors unless every grid sample exceeds [`POSITIVITY_THRESHOLD`].
    pub fn check_positive(&self, grid: &QuadratureGrid, exec: Exec) -> Result<f64> {
        let s = self.samples(grid, exec);
        for (node, &value) in s.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { node, value });
            }
        }
        let (node, value) = self.grid_min(grid, exec);
        if value <= POSITIVITY_THRESHOLD {
            return Err(Error::NonPositive { node, point: grid.nodes[node], value });
        }
        Ok(value)
    }
}

/// `(int u^q)^{1/q}` on the given grid. For `q < 1` every sample must be
/// strictly positive.
pub fn pnorm(u: &SphereField, q: f64, grid: &QuadratureGrid, exec: Exec) -> Result<f64> {
    if q == 0.0 || !q.is_finite() {
        return Err(Error::InvalidInput(format!("exponent q = {q} is not allowed")));
    }
    let s = u.samples(grid, exec);
    if q < 1.0 {
        if let Some((node, &value)) = s.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(Error::NonPositive { node, point: grid.nodes[node], value });
        }
    }
    let powered: Vec<f64> = s.iter().map(|v| v.abs().powf(q)).collect();
    Ok(grid.integrate_samples(&powered)?.powf(1.0 / q))
}

/// `int f g - ||f||_{1/q} ||g||_{-1/(q-1)}`, nonnegative by the reverse Holder
/// inequality for `q > 1`.
pub fn reverse_holder_gap(
    f: &SphereField,
    g: &SphereField,
    q: f64,
    grid: &QuadratureGrid,
    exec: Exec,
) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::InvalidInput(format!("reverse Holder needs q > 1, got {q}")));
    }
    f.check_positive(grid, exec)?;
    g.check_positive(grid, exec)?;
    let fs = f.samples(grid, exec);
    let gs = g.samples(grid, exec);
    let prod: Vec<f64> = fs.iter().zip(gs.iter()).map(|(a, b)| a * b).collect();
    let lhs = grid.integrate_samples(&prod)?;
    Ok(lhs - pnorm(f, 1.0 / q, grid, exec)? * pnorm(g, -1.0 / (q - 1.0), grid, exec)?)
}

fn tangent_frame(n: usize, x: &Point) -> Vec<Point> {
    // Gram-Schmidt of coordinate axes against x, within the first n+1 coordinates.
    let mut frame: Vec<Point> = Vec::with_capacity(n);
    for i in 0..=n {
        let mut v = sphere::axis(i);
        let d = sphere::dot(&v, x);
        for k in 0..3 {
            v[k] -= d * x[k];
        }
        for f in &frame {
            let d = sphere::dot(&v, f);
            for k in 0..3 {
                v[k] -= d * f[k];
            }
        }
        let nv = sphere::norm(&v);
        if nv > 1e-3 {
            frame.push([v[0] / nv, v[1] / nv, v[2] / nv]);
        }
        if frame.len() == n {
            break;
        }
    }
    frame
}

/// Minimum of `u` over the sphere: best grid node, then a compass search
/// along great circles down to a step of 1e-10.
pub fn min_on_sphere(u: &SphereField, grid: &QuadratureGrid, exec: Exec) -> (Point, f64) {
    let (node, mut best) = u.grid_min(grid, exec);
    let mut x = grid.nodes[node];
    let mut step = std::f64::consts::PI / grid.resolution as f64;
    while step > 1e-10 {
        let mut moved = false;
        for t in tangent_frame(u.n(), &x) {
            for sign in [1.0, -1.0] {
                let (c, s) = (step.cos(), step.sin());
                let y = [c * x[0] + sign * s * t[0], c * x[1] + sign * s * t[1], c * x[2] + sign * s * t[2]];
                let v = u.eval(&y);
                if v < best {
                    best = v;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (x, best)
}

/// One term `c * v_zeta` of a bubble sum, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleTerm {
    pub c: f64,
    pub zeta: Vec<f64>,
}

/// Field description accepted by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `offset + sum value * Y_{l,m}` with `[l, m, value]` triples.
    Harmonic {
        n: usize,
        coeffs: Vec<(usize, i64, f64)>,
        #[serde(default)]
        offset: f64,
    },
    BubbleSum { n: usize, terms: Vec<BubbleTerm> },
    /// `(1 + beta w_N)^{(n-2s)/2} + (1 - beta w_N)^{(n-2s)/2}` with `w_N` the
    /// north coordinate.
    TwoBubble { n: usize, beta: f64 },
}

impl FieldSpec {
    pub fn n(&self) -> usize {
        match self {
            FieldSpec::Harmonic { n, .. } | FieldSpec::BubbleSum { n, .. } | FieldSpec::TwoBubble { n, .. } => *n,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("field JSON: {e}")))
    }

    /// Builds the evaluator and checks positivity on a grid fine enough for
    /// the description.
    pub fn build(&self, params: &SpectralParams) -> Result<SphereField> {
        let n = self.n();
        sphere::check_dimension(n)?;
        if n != params.n {
            return Err(Error::InvalidInput(format!("field is on S^{n} but n = {}", params.n)));
        }
        let (field, degree) = match self {
            FieldSpec::Harmonic { coeffs, offset, .. } => {
                let max_l = coeffs.iter().map(|c| c.0).max().unwrap_or(0);
                let mut dense = vec![0.0; sphere::basis_len(n, max_l)];
                for &(l, m, v) in coeffs {
                    if !v.is_finite() {
                        return Err(Error::InvalidInput(format!("coefficient ({l}, {m}) is not finite")));
                    }
                    dense[basis_index(n, l, m)?] += v;
                }
                let offset = *offset;
                let f = SphereField::new(n, "harmonic", move |p| {
                    let y = eval_basis(n, max_l, p);
                    offset + y.iter().zip(&dense).map(|(a, b)| a * b).sum::<f64>()
                });
                (f, max_l + 4)
            }
            FieldSpec::BubbleSum { terms, .. } => {
                if terms.is_empty() {
                    return Err(Error::InvalidInput("bubble_sum needs at least one term".into()));
                }
                let bubbles = terms
                    .iter()
                    .map(|t| {
                        if !(t.c > 0.0) {
                            return Err(Error::InvalidInput(format!("bubble weight c = {} must be positive", t.c)));
                        }
                        Bubble::from_slice(n, t.c, &t.zeta)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let sigma = params.sigma;
                let worst = bubbles.iter().map(|b| sphere::norm(&b.zeta)).fold(0.0, f64::max);
                let f = SphereField::new(n, "bubble_sum", move |p| bubbles.iter().map(|b| b.value(sigma, p)).sum());
                (f, if worst > 0.9 { 128 } else { 48 })
            }
            FieldSpec::TwoBubble { beta, .. } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(Error::InvalidInput(format!("beta = {beta} must lie in (0, 1)")));
                }
                (two_bubble(params, *beta), 64)
            }
        };
        let grid = QuadratureGrid::for_degree(n, degree)?;
        field.check_positive(&grid, Exec::default())?;
        Ok(field)
    }
}

/// The symmetric two-bubble field with parameter `beta`.
pub fn two_bubble(params: &SpectralParams, beta: f64) -> SphereField {
    let n = params.n;
    let e = (n as f64 - 2.0 * params.s) / 2.0;
    SphereField::new(n, format!("two_bubble(beta = {beta})"), move |p| {
        (1.0 + beta * p[n]).powf(e) + (1.0 - beta * p[n]).powf(e)
    })
}

/// `1 + sum c_k Y_k` over degrees `1..=max_degree` with random coefficients,
/// scaled so the perturbation never exceeds `amplitude < 1` in absolute value.
pub fn random_harmonic<R: rand::Rng>(n: usize, max_degree: usize, amplitude: f64, rng: &mut R) -> SphereField {
    let len = sphere::basis_len(n, max_degree);
    let mut coeffs: Vec<f64> = (0..len).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    coeffs[0] = 0.0;
    let bound: f64 = (1..=max_degree)
        .map(|l| {
            let sup = ((2 * l + 1) as f64 / (2.0 * std::f64::consts::PI)).sqrt();
            sphere::band_range(n, l).map(|k| coeffs[k].abs()).sum::<f64>() * sup
        })
        .sum();
    let target = amplitude * rng.random::<f64>().max(0.1);
    for c in coeffs.iter_mut() {
        *c *= target / bound;
    }
    SphereField::new(n, format!("random_harmonic(L = {max_degree})"), move |p| {
        1.0 + eval_basis(n, max_degree, p).iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>()
    })
}

/// A random positive field: a harmonic perturbation of 1 plus, half the
/// time, a bubble with `|zeta| <= zeta_max`.
pub fn random_positive<R: rand::Rng>(params: &SpectralParams, zeta_max: f64, rng: &mut R) -> SphereField {
    let n = params.n;
    let degree = 1 + (rng.random::<f64>() * 4.0) as usize;
    let h = random_harmonic(n, degree, 0.8, rng);
    if rng.random::<bool>() {
        let dir = crate::conformal::random_unit(n, rng);
        let r = zeta_max * rng.random::<f64>();
        let c = 0.2 + rng.random::<f64>();
        let b = Bubble { n, c, zeta: [r * dir[0], r * dir[1], r * dir[2]] }.field(params);
        h.combine(1.0, &b, 1.0)
    } else {
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::build_grid;
    use std::f64::consts::PI;

    fn params() -> SpectralParams {
        SpectralParams::new(2, 1.5).unwrap()
    }

    #[test]
    fn pnorm_of_constant() {
        let g = build_grid(2, 24).unwrap();
        let one = SphereField::constant(2, 1.0);
        for q in [-4.0, -1.0, 0.5, 2.0] {
            let v = pnorm(&one, q, &g, Exec::Sequential).unwrap();
            assert!((v - (4.0 * PI).powf(1.0 / q)).abs() < 1e-13 * v.abs());
        }
    }

    #[test]
    fn pnorm_rejects_nonpositive_sample() {
        let g = build_grid(2, 16).unwrap();
        let u = SphereField::new(2, "z", |p| p[2]);
        match pnorm(&u, -4.0, &g, Exec::Sequential) {
            Err(Error::NonPositive { node, point, value }) => {
                assert!(value <= 0.0);
                assert_eq!(point, g.nodes[node]);
            }
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(pnorm(&u, 0.0, &g, Exec::Sequential).is_err());
    }

    #[test]
    fn pnorm_homogeneous() {
        let g = build_grid(2, 24).unwrap();
        let u = SphereField::new(2, "u", |p| 1.0 + 0.5 * p[2]);
        let a = pnorm(&u, -4.0, &g, Exec::Sequential).unwrap();
        let b = pnorm(&u.scaled(3.0), -4.0, &g, Exec::Sequential).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-14 * b);
    }

    #[test]
    fn holder_equality_case() {
        let g = build_grid(2, 32).unwrap();
        let q = 2.0;
        let gf = SphereField::new(2, "g", |p| 1.0 + 0.4 * p[0] * p[1] + 0.2 * p[2]);
        let gf2 = gf.clone();
        let f = SphereField::new(2, "f", move |p| gf2.eval(p).powf(-q / (q - 1.0)));
        let gap = reverse_holder_gap(&f, &gf, q, &g, Exec::Sequential).unwrap();
        assert!(gap.abs() < 1e-9, "gap = {gap}");
        let one = SphereField::constant(2, 1.0);
        assert!(reverse_holder_gap(&one, &one, 3.0, &g, Exec::Sequential).unwrap().abs() < 1e-12);
        let f = SphereField::new(2, "f", |p| 1.0 + 0.3 * p[2]);
        assert!(reverse_holder_gap(&f, &one, 2.0, &g, Exec::Sequential).unwrap() > 1e-4);
    }

    #[test]
    fn minimum_of_tilted_constant() {
        let g = build_grid(2, 16).unwrap();
        let u = SphereField::new(2, "u", |p| 1.0 + 0.5 * p[2]);
        let (x, m) = min_on_sphere(&u, &g, Exec::Sequential);
        assert!((m - 0.5).abs() < 1e-10, "min = {m}");
        assert!(x[2] < -0.999_999);
        let (_, one) = min_on_sphere(&SphereField::constant(2, 1.0), &g, Exec::Sequential);
        assert_eq!(one, 1.0);
    }

    #[test]
    fn minimum_of_concentrated_bubble() {
        let p = params();
        let b = Bubble::new(2, 1.0, [0.0, 0.0, 0.9]).unwrap();
        let sigma = p.sigma;
        let u = SphereField::new(2, "v", move |x| b.value(sigma, x));
        let g = build_grid(2, 32).unwrap();
        let (x, m) = min_on_sphere(&u, &g, Exec::Sequential);
        let expect = 0.19f64.powf(-sigma / 2.0) * 0.1f64.powf(sigma);
        assert!((m - expect).abs() < 1e-10 * expect, "{m} vs {expect}");
        assert!(x[2] > 0.999_999);
    }

    #[test]
    fn field_json_round_trip_and_validation() {
        let p = params();
        let spec = FieldSpec::from_json(r#"{"type":"harmonic","n":2,"coeffs":[[2,0,0.05]],"offset":1.0}"#).unwrap();
        let u = spec.build(&p).unwrap();
        let y20 = crate::sphere::zonal(2, 2, &[0.0, 0.0, 1.0]);
        assert!((u.eval(&[0.0, 0.0, 1.0]) - (1.0 + 0.05 * y20)).abs() < 1e-14);
        let back: FieldSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);

        let neg = FieldSpec::from_json(r#"{"type":"harmonic","n":2,"coeffs":[[1,0,5.0]],"offset":1.0}"#).unwrap();
        assert!(matches!(neg.build(&p), Err(Error::NonPositive { .. })));
        let bs = FieldSpec::from_json(r#"{"type":"bubble_sum","n":2,"terms":[{"c":1.0,"zeta":[0,0,0.5]}]}"#).unwrap();
        assert!(bs.build(&p).is_ok());
        let out = FieldSpec::from_json(r#"{"type":"bubble_sum","n":2,"terms":[{"c":1.0,"zeta":[0,0,1.0]}]}"#).unwrap();
        assert!(out.build(&p).is_err());
        assert!(FieldSpec::from_json(r#"{"type":"nope","n":2}"#).is_err());
        let wrong_n = FieldSpec::from_json(r#"{"type":"two_bubble","n":1,"beta":0.5}"#).unwrap();
        assert!(wrong_n.build(&p).is_err());
    }
}
