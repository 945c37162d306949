//! Quadrature on S^1 and S^2 and the real spherical-harmonic transform.
//!
//! Points are stored as `[f64; 3]` with unused trailing coordinates set to
//! zero. On S^n the distinguished "north" coordinate is index `n`.

mod grid;
mod harmonics;
mod transform;

pub use grid::{build_grid, QuadratureGrid};
pub use harmonics::{band_range, basis_index, basis_len, eval_basis, zonal};
pub use transform::{transform_for, Coeffs, Transform};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vector along coordinate axis `i`.
pub fn axis(i: usize) -> Point {
    let mut e = [0.0; 3];
    e[i] = 1.0;
    e
}

/// North pole `e_{n+1}` of S^n.
pub fn north(n: usize) -> Point {
    axis(n)
}

pub fn check_dimension(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("sphere dimension n = {n} is not supported (only 1 and 2)")))
    }
}

/// Weighted sum of `f` over the grid. Errors on the first non-finite sample.
pub fn integrate<F>(grid: &QuadratureGrid, f: F) -> Result<f64>
where
    F: Fn(&Point) -> f64,
{
    let samples: Vec<f64> = grid.nodes.iter().map(&f).collect();
    grid.integrate_samples(&samples)
}

/// `||P_ell f||^2` for a function sampled through an evaluator.
pub fn project<F>(grid: &QuadratureGrid, f: F, ell: usize) -> Result<f64>
where
    F: Fn(&Point) -> f64,
{
    Ok(spectrum(grid, f, ell)?[ell])
}

/// `||P_ell f||^2` for `ell = 0..=max_degree`.
pub fn spectrum<F>(grid: &QuadratureGrid, f: F, max_degree: usize) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> f64,
{
    if max_degree > grid.supported_degree() {
        return Err(Error::InvalidInput(format!(
            "degree {max_degree} exceeds the exactness of a resolution-{} grid (max {})",
            grid.resolution,
            grid.supported_degree()
        )));
    }
    let samples: Vec<f64> = grid.nodes.iter().map(&f).collect();
    if let Some((node, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { node, value });
    }
    let t = Transform::for_grid(grid.clone(), max_degree);
    Ok(t.analyze(&samples, crate::par::Exec::default()).band_norms())
}
