//! Spectral numerics for the reverse Sobolev inequality on S^1 and S^2:
//! the quadratic form `a_2s`, negative-exponent norms, the conformal bubble
//! family, the orthogonal decomposition behind the modified distance, and
//! the stability quotient with its local and asymptotic probes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod decompose;
pub mod error;
pub mod field;
pub mod par;
pub mod quad1d;
pub mod quadform;
pub mod specialfn;
pub mod sphere;
pub mod stability;
pub mod verify;

pub use error::{Error, Result};
pub use par::Exec;
pub use specialfn::SpectralParams;
