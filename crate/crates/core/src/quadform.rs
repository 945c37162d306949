//! The quadratic form `a_2s[u] = sum_l alpha(l) ||P_l u||^2`, its polarization,
//! the reverse Sobolev deficit and truncation control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{pnorm, SphereField};
use crate::par::Exec;
use crate::specialfn::{alpha_table, sobolev_constant, SpectralParams};
use crate::sphere::{transform_for, Coeffs};

/// Tail tolerance on the last two band energies relative to the absolute sum.
pub const TAIL_TOL: f64 = 1e-8;
/// Bands below this fraction of the absolute sum count as numerically zero.
pub const NOISE_FLOOR: f64 = 1e-12;
/// Number of trailing degrees over which the band envelope must not grow.
pub const DECAY_WINDOW: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics {
    pub degree: usize,
    /// `alpha(l) ||P_l u||^2` for each degree.
    pub band_energies: Vec<f64>,
    pub positive_sum: f64,
    pub negative_sum: f64,
    pub tail_ratio: f64,
    pub monotone_tail: bool,
    pub converged: bool,
}

/// Convergence diagnostics for a truncated band sum.
pub fn diagnose(alpha: &[f64], band_norms: &[f64]) -> SpectralDiagnostics {
    let degree = band_norms.len() - 1;
    let bands: Vec<f64> = band_norms.iter().zip(alpha).map(|(b, a)| a * b).collect();
    let positive_sum: f64 = bands.iter().filter(|b| **b > 0.0).sum();
    let negative_sum: f64 = bands.iter().filter(|b| **b < 0.0).sum();
    let abs_sum = positive_sum - negative_sum;
    let envelope = |l: usize| -> f64 {
        let prev = if l > 0 { bands[l - 1].abs() } else { 0.0 };
        bands[l].abs().max(prev)
    };
    let tail_ratio = if abs_sum > 0.0 { envelope(degree) / abs_sum } else { 0.0 };
    let floor = NOISE_FLOOR * abs_sum;
    let start = degree.saturating_sub(DECAY_WINDOW).max(1);
    let monotone_tail = (start + 1..=degree).all(|l| {
        let (a, b) = (envelope(l - 1), envelope(l));
        b <= floor || b <= a * (1.0 + 1e-12)
    });
    SpectralDiagnostics {
        degree,
        converged: tail_ratio < TAIL_TOL && monotone_tail,
        band_energies: bands,
        positive_sum,
        negative_sum,
        tail_ratio,
        monotone_tail,
    }
}

pub fn default_ladder(n: usize) -> Vec<usize> {
    match n {
        1 => vec![64, 128, 256],
        _ => vec![48, 96, 192, 256],
    }
}

/// Evaluates `a_2s` and friends with adaptive truncation over a ladder of degrees.
#[derive(Debug, Clone)]
pub struct SpectralEngine {
    pub params: SpectralParams,
    pub exec: Exec,
    ladder: Vec<usize>,
    alpha: Vec<f64>,
}

/// Everything that enters the deficit of one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deficit {
    pub a2s: f64,
    pub norm_p: f64,
    pub deficit: f64,
    /// `sum_l |alpha(l)| ||P_l u||^2`, the magnitude against which tolerances scale.
    pub scale: f64,
    pub diagnostics: SpectralDiagnostics,
}

impl SpectralEngine {
    pub fn new(params: SpectralParams) -> Self {
        Self::with_ladder(params, default_ladder(params.n))
    }

    pub fn with_ladder(params: SpectralParams, mut ladder: Vec<usize>) -> Self {
        ladder.sort_unstable();
        ladder.dedup();
        assert!(!ladder.is_empty(), "empty truncation ladder");
        let alpha = alpha_table(&params, *ladder.last().unwrap());
        Self { params, exec: Exec::default(), ladder, alpha }
    }

    /// Ladder starting at `degree`: the default rungs above it, capped at 256.
    pub fn with_start_degree(params: SpectralParams, degree: usize) -> Self {
        let mut ladder: Vec<usize> = default_ladder(params.n).into_iter().filter(|&l| l > degree).collect();
        ladder.insert(0, degree.min(256));
        Self::with_ladder(params, ladder)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn ladder(&self) -> &[usize] {
        &self.ladder
    }

    pub fn max_degree(&self) -> usize {
        *self.ladder.last().unwrap()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Coefficients of `u` up to `degree` on the matching exact grid.
    pub fn coeffs_at(&self, u: &SphereField, degree: usize) -> Result<Coeffs> {
        let t = transform_for(self.n(), degree);
        let samples = u.samples(&t.grid, self.exec);
        if let Some((node, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(t.analyze(&samples, self.exec))
    }

    pub fn diagnose(&self, c: &Coeffs) -> SpectralDiagnostics {
        diagnose(&self.alpha[..=c.degree], &c.band_norms())
    }

    /// Coefficients at the first ladder degree whose tail passes the check.
    pub fn converged_from(&self, u: &SphereField, min_degree: usize) -> Result<(Coeffs, SpectralDiagnostics)> {
        let mut last = None;
        for &l in self.ladder.iter().filter(|&&l| l >= min_degree) {
            let c = self.coeffs_at(u, l)?;
            let d = self.diagnose(&c);
            if d.converged {
                return Ok((c, d));
            }
            last = Some(d);
        }
        match last {
            Some(d) => Err(Error::Truncation(Box::new(d))),
            None => {
                let c = self.coeffs_at(u, self.max_degree())?;
                let d = self.diagnose(&c);
                if d.converged {
                    Ok((c, d))
                } else {
                    Err(Error::Truncation(Box::new(d)))
                }
            }
        }
    }

    pub fn converged(&self, u: &SphereField) -> Result<(Coeffs, SpectralDiagnostics)> {
        self.converged_from(u, 0)
    }

    pub fn value(&self, c: &Coeffs) -> f64 {
        c.band_norms().iter().zip(&self.alpha).map(|(b, a)| a * b).sum()
    }

    pub fn bilinear(&self, a: &Coeffs, b: &Coeffs) -> f64 {
        a.band_dots(b).iter().zip(&self.alpha).map(|(d, al)| al * d).sum()
    }

    pub fn scale(&self, c: &Coeffs) -> f64 {
        c.band_norms().iter().zip(&self.alpha).map(|(b, a)| a.abs() * b).sum()
    }

    pub fn a2s(&self, u: &SphereField) -> Result<(f64, SpectralDiagnostics)> {
        let (c, d) = self.converged(u)?;
        Ok((self.value(&c), d))
    }

    /// Coefficients of both fields at a common degree where both have converged.
    pub fn common_coeffs(&self, u: &SphereField, v: &SphereField) -> Result<(Coeffs, Coeffs)> {
        let (cu, _) = self.converged(u)?;
        let (cv, _) = self.converged(v)?;
        Ok(match cu.degree.cmp(&cv.degree) {
            std::cmp::Ordering::Less => (self.coeffs_at(u, cv.degree)?, cv),
            std::cmp::Ordering::Greater => {
                let d = cu.degree;
                (cu, self.coeffs_at(v, d)?)
            }
            std::cmp::Ordering::Equal => (cu, cv),
        })
    }

    pub fn a2s_bilinear(&self, u: &SphereField, v: &SphereField) -> Result<f64> {
        let (a, b) = self.common_coeffs(u, v)?;
        Ok(self.bilinear(&a, &b))
    }

    /// `||u||_q` on the grid of truncation degree `degree`.
    pub fn pnorm_at(&self, u: &SphereField, q: f64, degree: usize) -> Result<f64> {
        let t = transform_for(self.n(), degree);
        pnorm(u, q, &t.grid, self.exec)
    }

    /// `a_2s[u] - S_s ||u||_p^2` at the degree where `u` converges.
    pub fn deficit(&self, u: &SphereField) -> Result<Deficit> {
        let (c, d) = self.converged(u)?;
        self.deficit_with(u, &c, d)
    }

    pub fn deficit_with(&self, u: &SphereField, c: &Coeffs, diagnostics: SpectralDiagnostics) -> Result<Deficit> {
        let a2s = self.value(c);
        let norm_p = self.pnorm_at(u, self.params.p, c.degree)?;
        let sobolev = sobolev_constant(&self.params);
        Ok(Deficit { a2s, norm_p, deficit: a2s - sobolev * norm_p * norm_p, scale: self.scale(c), diagnostics })
    }
}
