//! Execution policy for the data-parallel loops.
//!
//! Every parallel loop in the crate is a map whose outputs are assembled in
//! index order, and every reduction over those outputs is sequential. Results
//! are therefore bit-identical for any thread count, including the sequential
//! fallback used when the `parallel` feature is disabled.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this policy actually fans out across threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map_range<R, F>(self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Weighted pairwise sum `sum_i w_i x_i`.
pub fn pairwise_dot(w: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), x.len());
    const BLOCK: usize = 32;
    if x.len() <= BLOCK {
        return w.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    let mid = x.len() / 2;
    pairwise_dot(&w[..mid], &x[..mid]) + pairwise_dot(&w[mid..], &x[mid..])
}
