use std::f64::consts::PI;

use serde::Serialize;

use super::{check_dimension, Point};
use crate::error::{Error, Result};
use crate::par::pairwise_dot;

/// Product quadrature on S^n. For `n = 2` the nodes are laid out latitude by
/// latitude, `nlon` nodes per latitude.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureGrid {
    pub n: usize,
    pub resolution: usize,
    #[serde(skip)]
    pub nodes: Vec<Point>,
    #[serde(skip)]
    pub weights: Vec<f64>,
    /// Gauss-Legendre abscissae in the polar cosine (`n = 2` only).
    #[serde(skip)]
    pub lat_cos: Vec<f64>,
    #[serde(skip)]
    pub lat_weights: Vec<f64>,
    pub nlon: usize,
}

/// Gauss-Legendre nodes and weights on [-1, 1], nodes in increasing order.
pub(crate) fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = mf * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// `n = 1`: `resolution` equispaced angles (exact for trigonometric
/// polynomials of degree < resolution). `n = 2`: `resolution` Gauss-Legendre
/// latitudes times `2 * resolution` equispaced longitudes.
pub fn build_grid(n: usize, resolution: usize) -> Result<QuadratureGrid> {
    check_dimension(n)?;
    if resolution < 8 {
        return Err(Error::InvalidInput(format!("grid resolution {resolution} is below the minimum of 8")));
    }
    let grid = match n {
        1 => {
            let h = 2.0 * PI / resolution as f64;
            let nodes = (0..resolution)
                .map(|j| {
                    let t = j as f64 * h;
                    [t.cos(), t.sin(), 0.0]
                })
                .collect();
            QuadratureGrid {
                n,
                resolution,
                nodes,
                weights: vec![h; resolution],
                lat_cos: Vec::new(),
                lat_weights: Vec::new(),
                nlon: resolution,
            }
        }
        _ => {
            let (xs, ws) = gauss_legendre(resolution);
            let nlon = 2 * resolution;
            let h = 2.0 * PI / nlon as f64;
            let mut nodes = Vec::with_capacity(resolution * nlon);
            let mut weights = Vec::with_capacity(resolution * nlon);
            for (&x, &w) in xs.iter().zip(&ws) {
                let st = (1.0 - x * x).sqrt();
                for j in 0..nlon {
                    let phi = j as f64 * h;
                    nodes.push([st * phi.cos(), st * phi.sin(), x]);
                    weights.push(w * h);
                }
            }
            QuadratureGrid { n, resolution, nodes, weights, lat_cos: xs, lat_weights: ws, nlon }
        }
    };
    Ok(grid)
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nlat(&self) -> usize {
        if self.n == 1 {
            1
        } else {
            self.resolution
        }
    }

    /// Largest degree L such that products of two degree-L functions are
    /// integrated exactly.
    pub fn supported_degree(&self) -> usize {
        match self.n {
            1 => (self.resolution - 1) / 2,
            _ => self.resolution - 1,
        }
    }

    /// Smallest resolution whose supported degree is at least `max_degree`.
    pub fn resolution_for(n: usize, max_degree: usize) -> usize {
        match n {
            1 => (2 * max_degree + 2).max(8),
            _ => (max_degree + 1).max(8),
        }
    }

    pub fn for_degree(n: usize, max_degree: usize) -> Result<Self> {
        build_grid(n, Self::resolution_for(n, max_degree))
    }

    pub fn integrate_samples(&self, samples: &[f64]) -> Result<f64> {
        if let Some((node, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(pairwise_dot(&self.weights, samples))
    }
}
