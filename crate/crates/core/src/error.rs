use thiserror::Error;

use crate::quadform::SpectralDiagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("gamma function pole at x = {0}")]
    GammaPole(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A sample that must be strictly positive was not.
    #[error("domain error: field value {value:e} at node {node} ({point:?}) is not strictly positive")]
    NonPositive {
        node: usize,
        point: [f64; 3],
        value: f64,
    },

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("spectral truncation did not converge (L = {}, tail ratio {:e})", .0.degree, .0.tail_ratio)]
    Truncation(Box<SpectralDiagnostics>),

    #[error("field lies on the optimizer manifold (deficit {deficit:e}, scale {scale:e}); the stability quotient is undefined")]
    OnManifold { deficit: f64, scale: f64 },

    #[error("solver failed: {0}")]
    NoConvergence(String),

    #[error("no critical point found for the orthogonal decomposition")]
    EmptyCriticalSet,

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for failures of a numerical procedure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Truncation(_)
                | Error::NoConvergence(_)
                | Error::EmptyCriticalSet
                | Error::GammaPole(_)
                | Error::NonFinite { .. }
        )
    }
}
