use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use super::grid::QuadratureGrid;
use super::harmonics::{band_range, basis_len, legendre_column};
use crate::par::Exec;

const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Real harmonic coefficients up to `degree`, laid out as in [`super::basis_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct Coeffs {
    pub n: usize,
    pub degree: usize,
    pub data: Vec<f64>,
}

impl Coeffs {
    pub fn zeros(n: usize, degree: usize) -> Self {
        Self { n, degree, data: vec![0.0; basis_len(n, degree)] }
    }

    pub fn band(&self, ell: usize) -> &[f64] {
        &self.data[band_range(self.n, ell)]
    }

    /// `||P_ell f||^2` for every degree.
    pub fn band_norms(&self) -> Vec<f64> {
        (0..=self.degree).map(|l| self.band(l).iter().map(|c| c * c).sum()).collect()
    }

    /// `<P_ell f, P_ell g>` for every degree.
    pub fn band_dots(&self, other: &Coeffs) -> Vec<f64> {
        assert_eq!((self.n, self.degree), (other.n, other.degree), "coefficient layouts differ");
        (0..=self.degree)
            .map(|l| self.band(l).iter().zip(other.band(l)).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Coeffs, b: f64) -> Coeffs {
        assert_eq!((self.n, self.degree), (other.n, other.degree), "coefficient layouts differ");
        Coeffs {
            n: self.n,
            degree: self.degree,
            data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn truncate(&self, degree: usize) -> Coeffs {
        let degree = degree.min(self.degree);
        Coeffs { n: self.n, degree, data: self.data[..basis_len(self.n, degree)].to_vec() }
    }
}

/// Analysis transform from grid samples to harmonic coefficients.
#[derive(Debug)]
pub struct Transform {
    pub degree: usize,
    pub grid: QuadratureGrid,
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
    legendre: Vec<f64>,
    leg_offsets: Vec<usize>,
}

impl Transform {
    /// Builds the transform on `grid`, which must integrate degree-`degree`
    /// products exactly.
    pub fn for_grid(grid: QuadratureGrid, degree: usize) -> Self {
        assert!(degree <= grid.supported_degree(), "grid too coarse for degree {degree}");
        let nlon = grid.nlon;
        let mut cos_table = vec![0.0; (degree + 1) * nlon];
        let mut sin_table = vec![0.0; (degree + 1) * nlon];
        for m in 0..=degree {
            for j in 0..nlon {
                let t = 2.0 * PI * ((m * j) % nlon) as f64 / nlon as f64;
                cos_table[m * nlon + j] = t.cos();
                sin_table[m * nlon + j] = t.sin();
            }
        }
        let (legendre, leg_offsets) = if grid.n == 2 {
            let nlat = grid.nlat();
            let mut offsets = Vec::with_capacity(degree + 2);
            let mut total = 0;
            for m in 0..=degree {
                offsets.push(total);
                total += (degree - m + 1) * nlat;
            }
            offsets.push(total);
            let blocks = Exec::Parallel.map_range(degree + 1, |m| {
                let mut block = vec![0.0; (degree - m + 1) * nlat];
                let mut col = vec![0.0; degree - m + 1];
                for (i, &x) in grid.lat_cos.iter().enumerate() {
                    let st = (1.0 - x * x).sqrt();
                    legendre_column(degree, m, x, st, &mut col);
                    for (k, v) in col.iter().enumerate() {
                        block[k * nlat + i] = *v;
                    }
                }
                block
            });
            (blocks.concat(), offsets)
        } else {
            (Vec::new(), Vec::new())
        };
        Self { degree, grid, cos_table, sin_table, legendre, leg_offsets }
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// Projects grid samples onto the orthonormal basis.
    pub fn analyze(&self, samples: &[f64], exec: Exec) -> Coeffs {
        assert_eq!(samples.len(), self.grid.len());
        match self.grid.n {
            1 => self.analyze_s1(samples, exec),
            _ => self.analyze_s2(samples, exec),
        }
    }

    fn analyze_s1(&self, samples: &[f64], exec: Exec) -> Coeffs {
        let nlon = self.grid.nlon;
        let h = 2.0 * PI / nlon as f64;
        let pairs = exec.map_range(self.degree + 1, |m| {
            let ct = &self.cos_table[m * nlon..(m + 1) * nlon];
            let st = &self.sin_table[m * nlon..(m + 1) * nlon];
            let a: f64 = samples.iter().zip(ct).map(|(f, c)| f * c).sum();
            let b: f64 = samples.iter().zip(st).map(|(f, s)| f * s).sum();
            (a * h, b * h)
        });
        let mut out = Coeffs::zeros(1, self.degree);
        out.data[0] = pairs[0].0 * INV_SQRT_2PI;
        for (ell, &(a, b)) in pairs.iter().enumerate().skip(1) {
            out.data[2 * ell - 1] = a * INV_SQRT_PI;
            out.data[2 * ell] = b * INV_SQRT_PI;
        }
        out
    }

    fn analyze_s2(&self, samples: &[f64], exec: Exec) -> Coeffs {
        let nlon = self.grid.nlon;
        let nlat = self.grid.nlat();
        let lmax = self.degree;
        let h = 2.0 * PI / nlon as f64;
        // Azimuthal Fourier coefficients per latitude, stored m-major.
        let rows = exec.map_range(nlat, |i| {
            let f = &samples[i * nlon..(i + 1) * nlon];
            let mut a = vec![0.0; lmax + 1];
            let mut b = vec![0.0; lmax + 1];
            for m in 0..=lmax {
                let ct = &self.cos_table[m * nlon..(m + 1) * nlon];
                let st = &self.sin_table[m * nlon..(m + 1) * nlon];
                let mut sa = 0.0;
                let mut sb = 0.0;
                for j in 0..nlon {
                    sa += f[j] * ct[j];
                    sb += f[j] * st[j];
                }
                a[m] = sa * h * self.grid.lat_weights[i];
                b[m] = sb * h * self.grid.lat_weights[i];
            }
            (a, b)
        });
        let mut fa = vec![0.0; (lmax + 1) * nlat];
        let mut fb = vec![0.0; (lmax + 1) * nlat];
        for (i, (a, b)) in rows.iter().enumerate() {
            for m in 0..=lmax {
                fa[m * nlat + i] = a[m];
                fb[m * nlat + i] = b[m];
            }
        }
        let per_m = exec.map_range(lmax + 1, |m| {
            let am = &fa[m * nlat..(m + 1) * nlat];
            let bm = &fb[m * nlat..(m + 1) * nlat];
            let base = self.leg_offsets[m];
            (m..=lmax)
                .map(|ell| {
                    let p = &self.legendre[base + (ell - m) * nlat..base + (ell - m + 1) * nlat];
                    let mut sa = 0.0;
                    let mut sb = 0.0;
                    for i in 0..nlat {
                        sa += p[i] * am[i];
                        sb += p[i] * bm[i];
                    }
                    (sa, sb)
                })
                .collect::<Vec<_>>()
        });
        let mut out = Coeffs::zeros(2, lmax);
        for (m, vals) in per_m.iter().enumerate() {
            for (k, &(sa, sb)) in vals.iter().enumerate() {
                let ell = m + k;
                if m == 0 {
                    out.data[ell * ell] = sa * INV_SQRT_2PI;
                } else {
                    out.data[ell * ell + 2 * m - 1] = sa * INV_SQRT_PI;
                    out.data[ell * ell + 2 * m] = sb * INV_SQRT_PI;
                }
            }
        }
        out
    }
}

type Cache = Mutex<HashMap<(usize, usize), Arc<Transform>>>;

/// Shared transform for truncation degree `degree` on the smallest exact grid.
pub fn transform_for(n: usize, degree: usize) -> Arc<Transform> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((n, degree))
        .or_insert_with(|| {
            let grid = QuadratureGrid::for_degree(n, degree).expect("supported dimension");
            Arc::new(Transform::for_grid(grid, degree))
        })
        .clone()
}
